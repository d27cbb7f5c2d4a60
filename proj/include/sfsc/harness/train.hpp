#pragma once

#include <iosfwd>
#include <vector>

#include "sfsc/harness/config.hpp"
#include "sfsc/harness/dataset.hpp"
#include "sfsc/harness/pipeline.hpp"

namespace sfsc::harness {

struct EpochLog {
    int64_t epoch = 0;
    double rec = 0.0, trans = 0.0, quant = 0.0, total = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    std::vector<EpochLog> history;
    double initial_total = 0.0;  // composite loss of the first batch, pre-update
    bool diverged = false;
};

/// Adam with optional cosine learning-rate decay, seeded batch shuffling and
/// per-batch SNR draws from the policy. Stops early on a non-finite loss.
TrainResult train_sfsc(semnet::SfscModel& model, const RunConfig& cfg, const Dataset& data,
                       std::ostream* log = nullptr);

/// Joint training of the two-user system; user pairs come from two seeded
/// shufflings of the same training tensor.
TrainResult train_csmdma(CsmdmaModel& model, const RunConfig& cfg, const Dataset& data,
                         std::ostream* log = nullptr);

}  // namespace sfsc::harness
