#pragma once

#include "qvr/model.hpp"

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace qvr {

struct SubprocessOptions {
    std::string command;          // run through /bin/sh -c
    std::size_t dimension = 1;
    std::size_t batch_size = 16;  // requests written before reading replies
    double timeout_seconds = 60.0;
    std::size_t workers = 1;      // child processes kept alive
};

/*!
 * Full model served by external simulator processes.
 *
 * Wire protocol, one JSON object per line in each direction:
 *
 *     -> {"id": 17, "x": [0.25, -1.5]}
 *     <- {"id": 17, "y": 3.125}
 *
 * Replies within a batch may come back in any order. A reply carrying
 * "error" instead of "y", an unknown or repeated id, malformed JSON, an early
 * EOF or a timeout raise ModelError; nothing is coerced. Results are cached
 * per input point keyed by the exact bit pattern, so an identical point is
 * never simulated twice within the lifetime of the model.
 */
class SubprocessModel final : public Evaluator {
public:
    explicit SubprocessModel(SubprocessOptions options);
    ~SubprocessModel() override;

    SubprocessModel(const SubprocessModel&) = delete;
    SubprocessModel& operator=(const SubprocessModel&) = delete;

    std::size_t dimension() const override { return options_.dimension; }
    double evaluate(std::span<const double> x) const override;
    std::vector<double> evaluate_batch(const PointSet& xs) const override;

    /// Number of requests actually sent to child processes.
    std::uint64_t simulator_calls() const { return calls_.load(); }

private:
    struct Child;
    struct KeyHash {
        std::size_t operator()(const std::vector<std::uint64_t>& key) const;
    };

    void run_chunk(Child& child, const PointSet& xs, const std::vector<std::size_t>& rows,
                   std::vector<double>& out) const;

    SubprocessOptions options_;
    std::vector<std::unique_ptr<Child>> children_;
    mutable std::mutex cache_mutex_;
    mutable std::unordered_map<std::vector<std::uint64_t>, double, KeyHash> cache_;
    mutable std::atomic<std::uint64_t> next_id_{0};
    mutable std::atomic<std::uint64_t> calls_{0};
};

}  // namespace qvr
