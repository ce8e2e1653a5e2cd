#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <set>
#include <thread>
#include <vector>

#include "shotnoise/errors.hpp"
#include "shotnoise/rng.hpp"

namespace shotnoise {

struct BatchOptions {
    unsigned threads = 1;
    std::vector<double> tail_thresholds;  // P(X >= c)
    std::vector<double> point_values;     // P(X == c)
};

struct TailEstimate {
    double level = 0.0;
    long count = 0;
    double prob = 0.0;
    double stderr_ = 0.0;
};

struct BatchSummary {
    long n = 0;
    double mean = 0.0;
    double variance = 0.0; // unbiased
    double mean_stderr = 0.0;
    std::vector<TailEstimate> tails;
    std::vector<TailEstimate> points;
    long flagged = 0; // paths reporting a flag (e.g. truncated clusters)
};

// One path outcome: value and whether the path raised a flag.
struct PathOutcome {
    double value = 0.0;
    bool flagged = false;
};

inline constexpr long batch_block = 4096;

inline void check_batch_inputs(long n_paths, const std::vector<std::uint64_t>& seeds) {
    if (n_paths <= 0) throw DomainError("batch: no paths requested, the summary would be empty");
    if (seeds.empty()) throw DomainError("batch: at least one seed is required");
    std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
    if (unique.size() != seeds.size()) throw DomainError("batch: seeds must be pairwise distinct");
}

// Stream of path p: (seeds[p mod S], p div S).
inline Stream path_stream(const std::vector<std::uint64_t>& seeds, long p) {
    const auto S = static_cast<long>(seeds.size());
    return Stream(seeds[static_cast<std::size_t>(p % S)], static_cast<std::uint64_t>(p / S));
}

// Runs `body(b)` for every block b in [0, blocks) on up to `threads` workers.
template <class Body>
void for_each_block(long blocks, unsigned threads, Body&& body) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max(1L, blocks))));
    if (threads == 1) {
        for (long b = 0; b < blocks; ++b) body(b);
        return;
    }
    std::atomic<long> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            try {
                for (long b = next++; b < blocks && !failed; b = next++) body(b);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

// op(Stream&) -> PathOutcome (or anything convertible to double).
template <class Op>
PathOutcome call_path_op(Op& op, Stream& rng) {
    if constexpr (std::is_convertible_v<decltype(op(rng)), double>) {
        return {static_cast<double>(op(rng)), false};
    } else {
        return op(rng);
    }
}

// Mean, variance and tail-count estimators over n_paths independent paths.
// Blocks of batch_block paths are summarised separately and merged in block
// order, so the result does not depend on the worker count.
template <class Op>
BatchSummary batch(Op op, long n_paths, const std::vector<std::uint64_t>& seeds, const BatchOptions& opt = {}) {
    check_batch_inputs(n_paths, seeds);
    struct Block {
        long n = 0;
        double mean = 0.0, m2 = 0.0;
        std::vector<long> tails, points;
        long flagged = 0;
    };
    const long blocks = (n_paths + batch_block - 1) / batch_block;
    std::vector<Block> parts(static_cast<std::size_t>(blocks));
    for_each_block(blocks, opt.threads, [&](long b) {
        Block blk;
        blk.tails.assign(opt.tail_thresholds.size(), 0);
        blk.points.assign(opt.point_values.size(), 0);
        const long end = std::min(n_paths, (b + 1) * batch_block);
        for (long p = b * batch_block; p < end; ++p) {
            Stream rng = path_stream(seeds, p);
            PathOutcome o = call_path_op(op, rng);
            ++blk.n;
            const double d = o.value - blk.mean;
            blk.mean += d / blk.n;
            blk.m2 += d * (o.value - blk.mean);
            for (std::size_t i = 0; i < opt.tail_thresholds.size(); ++i)
                if (o.value >= opt.tail_thresholds[i]) ++blk.tails[i];
            for (std::size_t i = 0; i < opt.point_values.size(); ++i)
                if (o.value == opt.point_values[i]) ++blk.points[i];
            if (o.flagged) ++blk.flagged;
        }
        parts[static_cast<std::size_t>(b)] = std::move(blk);
    });
    BatchSummary s;
    double mean = 0.0, m2 = 0.0;
    std::vector<long> tails(opt.tail_thresholds.size(), 0), points(opt.point_values.size(), 0);
    for (const auto& blk : parts) {
        const long n = s.n + blk.n;
        const double d = blk.mean - mean;
        mean += d * blk.n / n;
        m2 += blk.m2 + d * d * static_cast<double>(s.n) * blk.n / n;
        s.n = n;
        for (std::size_t i = 0; i < tails.size(); ++i) tails[i] += blk.tails[i];
        for (std::size_t i = 0; i < points.size(); ++i) points[i] += blk.points[i];
        s.flagged += blk.flagged;
    }
    s.mean = mean;
    s.variance = s.n > 1 ? m2 / (s.n - 1) : 0.0;
    s.mean_stderr = std::sqrt(s.variance / s.n);
    auto estimate = [&](double level, long count) {
        const double p = static_cast<double>(count) / s.n;
        return TailEstimate{level, count, p, std::sqrt(p * (1 - p) / s.n)};
    };
    for (std::size_t i = 0; i < tails.size(); ++i) s.tails.push_back(estimate(opt.tail_thresholds[i], tails[i]));
    for (std::size_t i = 0; i < points.size(); ++i) s.points.push_back(estimate(opt.point_values[i], points[i]));
    return s;
}

// All path values in path order, plus the number of flagged paths.
template <class Op>
std::vector<double> batch_collect(Op op, long n_paths, const std::vector<std::uint64_t>& seeds, unsigned threads = 1,
                                  long* flagged = nullptr) {
    check_batch_inputs(n_paths, seeds);
    std::vector<double> values(static_cast<std::size_t>(n_paths));
    const long blocks = (n_paths + batch_block - 1) / batch_block;
    std::vector<long> flags(static_cast<std::size_t>(blocks), 0);
    for_each_block(blocks, threads, [&](long b) {
        const long end = std::min(n_paths, (b + 1) * batch_block);
        for (long p = b * batch_block; p < end; ++p) {
            Stream rng = path_stream(seeds, p);
            PathOutcome o = call_path_op(op, rng);
            values[static_cast<std::size_t>(p)] = o.value;
            if (o.flagged) ++flags[static_cast<std::size_t>(b)];
        }
    });
    if (flagged) {
        *flagged = 0;
        for (long f : flags) *flagged += f;
    }
    return values;
}

} // namespace shotnoise
