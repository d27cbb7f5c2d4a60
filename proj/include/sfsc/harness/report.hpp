#pragma once

#include <string>
#include <vector>

#include "sfsc/harness/evaluate.hpp"

namespace sfsc::harness {

/// CSV schema: run_id,mode,ul_snr_db,dl_snr_db,psnr_db,ms_ssim,rate.
void write_csv(const std::string& path, const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_csv(const std::string& path);

/// Lines of `metric` (psnr_db or ms_ssim) against downlink SNR, one series
/// per (run_id, mode, ul_snr_db) triple.
void write_line_plot_svg(const std::string& path, const std::vector<SweepRow>& rows,
                         const std::string& metric = "psnr_db");

/// PSNR over the uplink x downlink SNR grid for one mode (the first mode in
/// the rows when `mode` is empty).
void write_heatmap_svg(const std::string& path, const std::vector<SweepRow>& rows,
                       const std::string& mode = "");

}  // namespace sfsc::harness
