#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "semcode/attention.hpp"
#include "semcode/bitio.hpp"
#include "semcode/error.hpp"
#include "semcode/tokenizer.hpp"

namespace semcode {

/// One merge pass. Pairs are (source, destination) in pre-stage indexing: the
/// source slot disappears, the destination slot receives the weighted average.
struct MergeStage {
    std::vector<std::pair<std::uint16_t, std::uint16_t>> pairs;
    std::vector<std::uint32_t> perm;  // pre-stage index -> post-stage index
};

struct MergePlan {
    std::vector<MergeStage> stages;

    bool empty() const { return stages.empty(); }
};

struct MergeSchedule {
    std::vector<std::uint32_t> per_stage;  // merge count per stage

    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (auto r : per_stage) t += r;
        return t;
    }
};

namespace detail {

// Cosine similarity rows; zero-norm rows get similarity -1 to everything.
inline Eigen::MatrixXd normalized_rows(const Eigen::MatrixXd& m, std::vector<bool>& zero_row) {
    Eigen::MatrixXd out = m;
    zero_row.assign(static_cast<std::size_t>(m.rows()), false);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double n = out.row(i).norm();
        if (n == 0.0) {
            zero_row[static_cast<std::size_t>(i)] = true;
        } else {
            out.row(i) /= n;
        }
    }
    return out;
}

inline Eigen::MatrixXd merge_rows(const Eigen::MatrixXd& m,
                                  const std::vector<std::pair<std::uint16_t, std::uint16_t>>& pairs,
                                  const std::vector<std::uint32_t>& sizes_before) {
    const Eigen::Index n = m.rows();
    std::vector<bool> removed(static_cast<std::size_t>(n), false);
    Eigen::MatrixXd work = m;
    for (const auto& [a, b] : pairs) {
        const double sa = static_cast<double>(sizes_before[a]);
        const double sb = static_cast<double>(sizes_before[b]);
        work.row(b) = (sa * m.row(a) + sb * m.row(b)) / (sa + sb);
        removed[a] = true;
    }
    Eigen::MatrixXd out(n - static_cast<Eigen::Index>(pairs.size()), m.cols());
    Eigen::Index w = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (!removed[static_cast<std::size_t>(i)]) out.row(w++) = work.row(i);
    return out;
}

}  // namespace detail

/// Alternating-partition soft matching: even indices form set A, odd form B.
/// Repeatedly selects the highest-cosine link between an unmatched A token
/// and an unused B token (ties: lower A index, then lower B index), r times.
/// Collision-free inputs reproduce the plain best-B-per-A top-r ranking.
inline std::vector<std::pair<std::uint16_t, std::uint16_t>> bipartite_soft_matching(
    const Eigen::MatrixXd& features, std::uint32_t r) {
    const Eigen::Index n = features.rows();
    if (r == 0) return {};
    if (n < 2 || r > static_cast<std::uint32_t>(n / 2))
        throw Error(ErrorCode::InvalidR,
                    "r=" + std::to_string(r) + " exceeds pairing limit for n=" + std::to_string(n));

    std::vector<std::uint32_t> set_a, set_b;
    for (Eigen::Index i = 0; i < n; i += 2) set_a.push_back(static_cast<std::uint32_t>(i));
    for (Eigen::Index i = 1; i < n; i += 2) set_b.push_back(static_cast<std::uint32_t>(i));

    std::vector<bool> zero_row;
    const Eigen::MatrixXd unit = detail::normalized_rows(features, zero_row);
    Eigen::MatrixXd sim(set_a.size(), set_b.size());
    for (std::size_t ia = 0; ia < set_a.size(); ++ia)
        for (std::size_t ib = 0; ib < set_b.size(); ++ib)
            sim(static_cast<Eigen::Index>(ia), static_cast<Eigen::Index>(ib)) =
                (zero_row[set_a[ia]] || zero_row[set_b[ib]])
                    ? -1.0
                    : unit.row(set_a[ia]).dot(unit.row(set_b[ib]));

    std::vector<bool> a_used(set_a.size(), false), b_used(set_b.size(), false);
    std::vector<std::pair<std::uint16_t, std::uint16_t>> pairs;
    pairs.reserve(r);
    for (std::uint32_t round = 0; round < r; ++round) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_a = 0, best_b = 0;
        for (std::size_t ia = 0; ia < set_a.size(); ++ia) {
            if (a_used[ia]) continue;
            for (std::size_t ib = 0; ib < set_b.size(); ++ib) {
                if (b_used[ib]) continue;
                const double s = sim(static_cast<Eigen::Index>(ia), static_cast<Eigen::Index>(ib));
                if (s > best) {
                    best = s;
                    best_a = ia;
                    best_b = ib;
                }
            }
        }
        a_used[best_a] = true;
        b_used[best_b] = true;
        pairs.emplace_back(static_cast<std::uint16_t>(set_a[best_a]), static_cast<std::uint16_t>(set_b[best_b]));
    }
    return pairs;
}

/// Replaces each (source, destination) pair by the size-weighted average at
/// the destination slot; surviving tokens keep their relative order.
inline std::pair<TokenSequence, MergeStage> apply_merge(
    const TokenSequence& ts, const std::vector<std::pair<std::uint16_t, std::uint16_t>>& pairs) {
    const Eigen::Index n = ts.count();
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (const auto& [a, b] : pairs) {
        if (a >= n || b >= n || a == b) throw Error(ErrorCode::InvalidPair, "pair index out of range");
        if (seen[a] || seen[b]) throw Error(ErrorCode::InvalidPair, "token index reused within a stage");
        seen[a] = seen[b] = true;
    }

    std::vector<bool> removed(static_cast<std::size_t>(n), false);
    for (const auto& [a, b] : pairs) removed[a] = true;

    TokenSequence out;
    out.tokens = detail::merge_rows(ts.tokens, pairs, ts.sizes);
    out.sizes.reserve(static_cast<std::size_t>(n) - pairs.size());
    out.origin.reserve(static_cast<std::size_t>(n) - pairs.size());

    // Post-stage contents at each surviving slot.
    std::vector<std::uint32_t> merged_size(static_cast<std::size_t>(n));
    std::vector<std::vector<std::uint32_t>> merged_origin(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        merged_size[static_cast<std::size_t>(i)] = ts.sizes[static_cast<std::size_t>(i)];
        merged_origin[static_cast<std::size_t>(i)] = ts.origin[static_cast<std::size_t>(i)];
    }
    for (const auto& [a, b] : pairs) {
        merged_size[b] += merged_size[a];
        merged_origin[b].insert(merged_origin[b].end(), merged_origin[a].begin(), merged_origin[a].end());
    }

    MergeStage stage;
    stage.pairs = pairs;
    stage.perm.assign(static_cast<std::size_t>(n), 0);
    std::uint32_t w = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (removed[static_cast<std::size_t>(i)]) continue;
        stage.perm[static_cast<std::size_t>(i)] = w;
        out.sizes.push_back(merged_size[static_cast<std::size_t>(i)]);
        out.origin.push_back(std::move(merged_origin[static_cast<std::size_t>(i)]));
        ++w;
    }
    for (const auto& [a, b] : pairs) stage.perm[a] = stage.perm[b];
    return {std::move(out), std::move(stage)};
}

/// Spreads n_start - n_target merges over n_stages as evenly as possible,
/// earlier stages taking the remainder, then shifts load earlier wherever the
/// bipartite pairing limit floor(N/2) binds.
inline MergeSchedule build_schedule(std::uint32_t n_start, std::uint32_t n_target, std::uint32_t n_stages) {
    if (n_target < 1 || n_target > n_start || n_stages < 1)
        throw Error(ErrorCode::Infeasible, "invalid schedule request");

    // Upper bound on reachable compaction: halving at every stage.
    std::uint32_t reach = n_start;
    for (std::uint32_t i = 0; i < n_stages; ++i) reach -= reach / 2;
    if (reach > n_target)
        throw Error(ErrorCode::Infeasible, "target " + std::to_string(n_target) + " unreachable in " +
                                               std::to_string(n_stages) + " stages from " + std::to_string(n_start));

    const std::uint32_t total = n_start - n_target;
    MergeSchedule sched;
    sched.per_stage.assign(n_stages, total / n_stages);
    for (std::uint32_t i = 0; i < total % n_stages; ++i) sched.per_stage[i] += 1;

    const std::uint32_t guard = n_stages * (total + 2) + 16;
    for (std::uint32_t iter = 0; iter < guard; ++iter) {
        std::uint32_t n = n_start;
        std::int64_t violation = -1;
        for (std::uint32_t l = 0; l < n_stages; ++l) {
            if (sched.per_stage[l] > n / 2) {
                violation = l;
                break;
            }
            n -= sched.per_stage[l];
        }
        if (violation < 0) return sched;

        std::uint32_t excess = sched.per_stage[violation] - n / 2;
        sched.per_stage[violation] = n / 2;
        // Earlier stages see more tokens, hence larger caps.
        std::uint32_t m = n_start;
        std::vector<std::uint32_t> before(n_stages);
        for (std::uint32_t l = 0; l < n_stages; ++l) {
            before[l] = m;
            m -= std::min(sched.per_stage[l], m);
        }
        for (std::int64_t j = violation - 1; j >= 0 && excess > 0; --j) {
            const std::uint32_t cap = before[j] / 2;
            const std::uint32_t spare = cap > sched.per_stage[j] ? cap - sched.per_stage[j] : 0;
            const std::uint32_t take = std::min(spare, excess);
            sched.per_stage[j] += take;
            excess -= take;
        }
        if (excess > 0) throw Error(ErrorCode::Infeasible, "pairing limits leave schedule infeasible");
    }
    throw Error(ErrorCode::Infeasible, "schedule repair did not converge");
}

enum class SimilaritySource { Tokens, Keys };

struct ReorganizeResult {
    TokenSequence seq;
    MergePlan plan;
};

/// Runs the merge schedule stage by stage. With an attention stage supplied,
/// a parallel context stream is advanced through the blocks and (for the Keys
/// source) its head-averaged key projections drive the matching; the
/// transmitted token values themselves are only ever merged, never mixed.
inline ReorganizeResult reorganize(const TokenSequence& ts, const MergeSchedule& schedule,
                                   SimilaritySource source = SimilaritySource::Tokens,
                                   const AttentionStage* attn = nullptr) {
    if (source == SimilaritySource::Keys && attn == nullptr)
        throw Error(ErrorCode::ConfigError, "keys similarity source requires an attention stage");
    const std::uint64_t total = schedule.total();
    if (total >= static_cast<std::uint64_t>(ts.count()))
        throw Error(ErrorCode::Infeasible, "schedule merges below one token");

    ReorganizeResult res;
    res.seq = ts;
    Eigen::MatrixXd ctx;
    if (attn != nullptr) ctx = ts.tokens;

    for (std::size_t l = 0; l < schedule.per_stage.size(); ++l) {
        const std::uint32_t r = schedule.per_stage[l];
        Eigen::MatrixXd features;
        if (attn != nullptr) {
            AttnSublayerResult a = attention_sublayer(ctx, *attn, static_cast<std::uint32_t>(l));
            features = (source == SimilaritySource::Keys) ? mean_over_heads(a.keys, attn->n_heads)
                                                          : res.seq.tokens;
            ctx = std::move(a.tokens);
        } else {
            features = res.seq.tokens;
        }

        const auto pairs = bipartite_soft_matching(features, r);
        const std::vector<std::uint32_t> sizes_before = res.seq.sizes;
        auto [merged, stage] = apply_merge(res.seq, pairs);
        res.seq = std::move(merged);
        if (attn != nullptr) {
            ctx = detail::merge_rows(ctx, pairs, sizes_before);
            ctx = ffn_sublayer(ctx, *attn, static_cast<std::uint32_t>(l));
        }
        res.plan.stages.push_back(std::move(stage));
    }
    return res;
}

/// Greedy agglomeration alternative: repeatedly merges the globally most
/// similar pair drawn from each token's k nearest cosine neighbors until
/// n_target tokens remain. Each merge is one single-pair plan stage.
inline ReorganizeResult knn_merge(const TokenSequence& ts, std::uint32_t k, std::uint32_t n_target) {
    if (n_target < 1 || static_cast<Eigen::Index>(n_target) > ts.count())
        throw Error(ErrorCode::Infeasible, "n_target out of range");

    ReorganizeResult res;
    res.seq = ts;
    while (res.seq.count() > static_cast<Eigen::Index>(n_target)) {
        const Eigen::Index n = res.seq.count();
        std::vector<bool> zero_row;
        const Eigen::MatrixXd unit = detail::normalized_rows(res.seq.tokens, zero_row);
        Eigen::MatrixXd sim = unit * unit.transpose();
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                if (zero_row[static_cast<std::size_t>(i)] || zero_row[static_cast<std::size_t>(j)])
                    sim(i, j) = -1.0;

        const std::uint32_t kk = std::min<std::uint32_t>(std::max<std::uint32_t>(k, 1),
                                                         static_cast<std::uint32_t>(n - 1));
        // neighbor[i] = indices of the kk most similar tokens, ties to lower index
        std::vector<std::vector<std::uint32_t>> neighbor(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            std::vector<std::uint32_t> idx;
            idx.reserve(static_cast<std::size_t>(n) - 1);
            for (Eigen::Index j = 0; j < n; ++j)
                if (j != i) idx.push_back(static_cast<std::uint32_t>(j));
            std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t x, std::uint32_t y) {
                const double sx = sim(i, x), sy = sim(i, y);
                if (sx != sy) return sx > sy;
                return x < y;
            });
            idx.resize(kk);
            neighbor[static_cast<std::size_t>(i)] = std::move(idx);
        }

        double best = -std::numeric_limits<double>::infinity();
        Eigen::Index bi = -1, bj = -1;
        auto consider = [&](Eigen::Index i, Eigen::Index j) {
            if (i > j) std::swap(i, j);
            const double s = sim(i, j);
            if (s > best || (s == best && (i < bi || (i == bi && j < bj)))) {
                best = s;
                bi = i;
                bj = j;
            }
        };
        for (Eigen::Index i = 0; i < n; ++i)
            for (std::uint32_t j : neighbor[static_cast<std::size_t>(i)]) consider(i, static_cast<Eigen::Index>(j));

        // Higher index is the source, lower index survives.
        const auto pair = std::make_pair(static_cast<std::uint16_t>(bj), static_cast<std::uint16_t>(bi));
        auto [merged, stage] = apply_merge(res.seq, {pair});
        res.seq = std::move(merged);
        res.plan.stages.push_back(std::move(stage));
    }
    return res;
}

/// Normalized constituent counts; larger means the token represents more of
/// the source and earns more transmission protection.
inline std::vector<double> token_significance(const TokenSequence& ts) {
    const double total = static_cast<double>(ts.total_size());
    std::vector<double> scores(ts.sizes.size());
    for (std::size_t i = 0; i < ts.sizes.size(); ++i) scores[i] = static_cast<double>(ts.sizes[i]) / total;
    return scores;
}

namespace detail {

struct ReplayedStructure {
    std::vector<std::uint32_t> sizes;
    std::vector<std::vector<std::uint32_t>> origin;
};

// Re-derives the final sizes/origins a plan produces from n0 singleton
// tokens. Structure only; no token values involved.
inline ReplayedStructure replay_plan_structure(std::uint32_t n0, const MergePlan& plan) {
    ReplayedStructure st;
    st.sizes.assign(n0, 1);
    st.origin.resize(n0);
    for (std::uint32_t i = 0; i < n0; ++i) st.origin[i] = {i};

    for (const auto& stage : plan.stages) {
        const std::size_t n = st.sizes.size();
        std::vector<bool> seen(n, false), removed(n, false);
        for (const auto& [a, b] : stage.pairs) {
            if (a >= n || b >= n || a == b || seen[a] || seen[b])
                throw Error(ErrorCode::PlanMismatch, "plan stage inconsistent with sequence shape");
            seen[a] = seen[b] = true;
            removed[a] = true;
        }
        for (const auto& [a, b] : stage.pairs) {
            st.sizes[b] += st.sizes[a];
            st.origin[b].insert(st.origin[b].end(), st.origin[a].begin(), st.origin[a].end());
        }
        std::size_t w = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (removed[i]) continue;
            st.sizes[w] = st.sizes[i];
            st.origin[w] = std::move(st.origin[i]);
            ++w;
        }
        st.sizes.resize(w);
        st.origin.resize(w);
    }
    return st;
}

}  // namespace detail

/// Inverts a reorganization by broadcast: every constituent slot of a merged
/// token receives the merged value. Result is the original token count with
/// unit sizes in original order.
inline TokenSequence unmerge(const TokenSequence& ts, const MergePlan& plan) {
    const std::uint64_t n0 = ts.total_size();
    if (n0 > 0xffffffffULL) throw Error(ErrorCode::PlanMismatch, "sequence too large");
    const auto st = detail::replay_plan_structure(static_cast<std::uint32_t>(n0), plan);
    if (st.sizes.size() != static_cast<std::size_t>(ts.count()))
        throw Error(ErrorCode::PlanMismatch, "plan output count does not match sequence");
    for (std::size_t i = 0; i < st.sizes.size(); ++i)
        if (st.sizes[i] != ts.sizes[i])
            throw Error(ErrorCode::PlanMismatch, "plan output sizes do not match sequence");

    TokenSequence out;
    out.tokens.resize(static_cast<Eigen::Index>(n0), ts.dim());
    out.sizes.assign(static_cast<std::size_t>(n0), 1);
    out.origin.resize(static_cast<std::size_t>(n0));
    for (std::size_t i = 0; i < st.origin.size(); ++i)
        for (std::uint32_t j : st.origin[i]) {
            out.tokens.row(j) = ts.tokens.row(static_cast<Eigen::Index>(i));
            out.origin[j] = {j};
        }
    return out;
}

// ---- plan serialization -----------------------------------------------------
// Per stage: u16 pair count, then (u16 source, u16 destination) pairs, all
// little-endian. The bit length of this stream is the plan's side-info cost.

inline void serialize_plan(const MergePlan& plan, std::vector<std::uint8_t>& out) {
    for (const auto& stage : plan.stages) {
        if (stage.pairs.size() > 0xffff) throw Error(ErrorCode::InvalidDimensions, "stage pair count overflow");
        put_u16(out, static_cast<std::uint16_t>(stage.pairs.size()));
        for (const auto& [a, b] : stage.pairs) {
            put_u16(out, a);
            put_u16(out, b);
        }
    }
}

inline MergePlan parse_plan(ByteReader& r, std::uint32_t n_stages) {
    MergePlan plan;
    plan.stages.resize(n_stages);
    for (std::uint32_t s = 0; s < n_stages; ++s) {
        const std::uint16_t count = r.get_u16();
        plan.stages[s].pairs.reserve(count);
        for (std::uint16_t i = 0; i < count; ++i) {
            const std::uint16_t a = r.get_u16();
            const std::uint16_t b = r.get_u16();
            plan.stages[s].pairs.emplace_back(a, b);
        }
    }
    return plan;
}

inline std::uint64_t plan_bit_size(const MergePlan& plan) {
    std::uint64_t bits = 0;
    for (const auto& stage : plan.stages) bits += 16 + 32ULL * stage.pairs.size();
    return bits;
}

}  // namespace semcode
