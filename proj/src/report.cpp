#include "sfsc/harness/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

namespace sfsc::harness {

namespace {

constexpr const char* kHeader = "run_id,mode,ul_snr_db,dl_snr_db,psnr_db,ms_ssim,rate";

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    return fields;
}

std::string fmt(double v) {
    std::ostringstream ss;
    ss << std::setprecision(10) << v;
    return ss.str();
}

}  // namespace

void write_csv(const std::string& path, const std::vector<SweepRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write csv: " + path);
    out << kHeader << "\n";
    for (const auto& r : rows) {
        out << r.run_id << "," << r.mode << "," << fmt(r.ul_snr_db) << "," << fmt(r.dl_snr_db)
            << "," << fmt(r.psnr_db) << "," << fmt(r.ms_ssim) << "," << fmt(r.rate) << "\n";
    }
}

std::vector<SweepRow> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read csv: " + path);
    std::string line;
    if (!std::getline(in, line) || line != kHeader) {
        throw std::runtime_error("unexpected csv header in " + path);
    }
    std::vector<SweepRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f = split_line(line);
        if (f.size() != 7) throw std::runtime_error("malformed csv row: " + line);
        rows.push_back({f[0], f[1], std::stod(f[2]), std::stod(f[3]), std::stod(f[4]),
                        std::stod(f[5]), std::stod(f[6])});
    }
    return rows;
}

namespace {

constexpr int kWidth = 720, kHeight = 480, kMargin = 60;
const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                         "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

double metric_of(const SweepRow& r, const std::string& metric) {
    if (metric == "psnr_db") return r.psnr_db;
    if (metric == "ms_ssim") return r.ms_ssim;
    if (metric == "rate") return r.rate;
    throw std::invalid_argument("unknown metric: " + metric);
}

double map_x(double v, double lo, double hi) {
    if (hi <= lo) return kMargin + (kWidth - 2 * kMargin) / 2.0;
    return kMargin + (v - lo) / (hi - lo) * (kWidth - 2 * kMargin);
}

double map_y(double v, double lo, double hi) {
    if (hi <= lo) return kHeight - kMargin - (kHeight - 2 * kMargin) / 2.0;
    return kHeight - kMargin - (v - lo) / (hi - lo) * (kHeight - 2 * kMargin);
}

}  // namespace

void write_line_plot_svg(const std::string& path, const std::vector<SweepRow>& rows,
                         const std::string& metric) {
    if (rows.empty()) throw std::invalid_argument("no rows to plot");
    std::map<std::string, std::vector<const SweepRow*>> series;
    double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
    for (const auto& r : rows) {
        std::ostringstream key;
        key << r.run_id << "/" << r.mode << "/ul=" << r.ul_snr_db << "dB";
        series[key.str()].push_back(&r);
        x_lo = std::min(x_lo, r.dl_snr_db);
        x_hi = std::max(x_hi, r.dl_snr_db);
        const double y = metric_of(r, metric);
        y_lo = std::min(y_lo, y);
        y_hi = std::max(y_hi, y);
    }

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write svg: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\""
        << kWidth - kMargin << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin
        << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 15
        << "\" text-anchor=\"middle\" font-size=\"13\">downlink SNR (dB)</text>\n"
        << "<text x=\"18\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" font-size=\"13\" "
        << "transform=\"rotate(-90 18 " << kHeight / 2 << ")\">" << metric << "</text>\n";

    int color_idx = 0;
    int legend_y = kMargin;
    for (auto& [name, pts] : series) {
        std::sort(pts.begin(), pts.end(),
                  [](const SweepRow* a, const SweepRow* b) { return a->dl_snr_db < b->dl_snr_db; });
        const char* color = kColors[color_idx % 8];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto* p : pts) {
            out << map_x(p->dl_snr_db, x_lo, x_hi) << "," << map_y(metric_of(*p, metric), y_lo, y_hi)
                << " ";
        }
        out << "\"/>\n";
        for (const auto* p : pts) {
            out << "<circle cx=\"" << map_x(p->dl_snr_db, x_lo, x_hi) << "\" cy=\""
                << map_y(metric_of(*p, metric), y_lo, y_hi) << "\" r=\"3\" fill=\"" << color
                << "\"/>\n";
        }
        out << "<text x=\"" << kWidth - kMargin - 200 << "\" y=\"" << legend_y
            << "\" font-size=\"11\" fill=\"" << color << "\">" << name << "</text>\n";
        legend_y += 15;
        ++color_idx;
    }
    // Axis extents.
    out << "<text x=\"" << kMargin << "\" y=\"" << kHeight - kMargin + 18
        << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt(x_lo) << "</text>\n"
        << "<text x=\"" << kWidth - kMargin << "\" y=\"" << kHeight - kMargin + 18
        << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt(x_hi) << "</text>\n"
        << "<text x=\"" << kMargin - 8 << "\" y=\"" << kHeight - kMargin
        << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(y_lo) << "</text>\n"
        << "<text x=\"" << kMargin - 8 << "\" y=\"" << kMargin
        << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(y_hi) << "</text>\n";
    out << "</svg>\n";
}

void write_heatmap_svg(const std::string& path, const std::vector<SweepRow>& rows,
                       const std::string& mode) {
    if (rows.empty()) throw std::invalid_argument("no rows to plot");
    const std::string target = mode.empty() ? rows.front().mode : mode;
    std::vector<double> uls, dls;
    std::map<std::pair<double, double>, double> grid;
    double lo = 1e300, hi = -1e300;
    for (const auto& r : rows) {
        if (r.mode != target) continue;
        if (std::find(uls.begin(), uls.end(), r.ul_snr_db) == uls.end()) uls.push_back(r.ul_snr_db);
        if (std::find(dls.begin(), dls.end(), r.dl_snr_db) == dls.end()) dls.push_back(r.dl_snr_db);
        grid[{r.ul_snr_db, r.dl_snr_db}] = r.psnr_db;
        lo = std::min(lo, r.psnr_db);
        hi = std::max(hi, r.psnr_db);
    }
    if (grid.empty()) throw std::invalid_argument("no rows for mode " + target);
    std::sort(uls.begin(), uls.end());
    std::sort(dls.begin(), dls.end());

    const double cw = double(kWidth - 2 * kMargin) / dls.size();
    const double ch = double(kHeight - 2 * kMargin) / uls.size();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write svg: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">"
        << target << " PSNR (dB), x: downlink SNR, y: uplink SNR</text>\n";
    for (size_t i = 0; i < uls.size(); ++i) {
        for (size_t j = 0; j < dls.size(); ++j) {
            auto it = grid.find({uls[i], dls[j]});
            if (it == grid.end()) continue;
            const double t = hi > lo ? (it->second - lo) / (hi - lo) : 0.5;
            const int rch = int(40 + 215 * t), g = int(40 + 120 * t), b = int(220 - 180 * t);
            const double x = kMargin + j * cw;
            const double y = kHeight - kMargin - (i + 1) * ch;
            out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cw << "\" height=\""
                << ch << "\" fill=\"rgb(" << rch << "," << g << "," << b << ")\"/>\n"
                << "<text x=\"" << x + cw / 2 << "\" y=\"" << y + ch / 2 + 4
                << "\" text-anchor=\"middle\" font-size=\"11\" fill=\"white\">" << std::fixed
                << std::setprecision(1) << it->second << "</text>\n";
            out.unsetf(std::ios_base::fixed);
            out << std::setprecision(6);
        }
    }
    for (size_t j = 0; j < dls.size(); ++j) {
        out << "<text x=\"" << kMargin + (j + 0.5) * cw << "\" y=\"" << kHeight - kMargin + 18
            << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(dls[j]) << "</text>\n";
    }
    for (size_t i = 0; i < uls.size(); ++i) {
        out << "<text x=\"" << kMargin - 8 << "\" y=\"" << kHeight - kMargin - (i + 0.5) * ch + 4
            << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(uls[i]) << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace sfsc::harness
