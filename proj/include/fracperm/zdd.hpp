#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "fracperm/cost_counter.hpp"
#include "fracperm/log_value.hpp"
#include "fracperm/matrix.hpp"

namespace fracperm {

/// Variable ids run 1..m. For a matrix, variable e+1 is stored entry e in
/// row-major order.
using Var = std::uint32_t;
using NodeRef = std::uint32_t;

struct ZddNode {
    Var var;
    NodeRef lo;
    NodeRef hi;
};

constexpr std::size_t kDefaultZddNodeCap = 100'000'000;

/// Reduced, ordered zero-suppressed decision diagram. Nodes live in an arena in
/// topological order: children always have smaller ids than their parent.
/// Ids 0 and 1 are the FALSE and TRUE sinks.
class Zdd {
public:
    static constexpr NodeRef kFalse = 0;
    static constexpr NodeRef kTrue = 1;
    static constexpr Var kSinkVar = UINT32_MAX;

    Zdd();  // empty family

    NodeRef root() const { return root_; }
    Var universe() const { return universe_; }
    std::span<const ZddNode> nodes() const { return nodes_; }
    const ZddNode& node(NodeRef r) const { return nodes_[r]; }

    /// Number of non-sink nodes.
    std::size_t size() const { return nodes_.size() - 2; }
    bool empty_family() const { return root_ == kFalse; }

    /// Is the given (sorted) set of variables a member of the family?
    bool contains(std::span<const Var> set) const;

    /// Number of sets in the family (double: exact below 2^53).
    double count() const;

    /// All member sets, up to `limit` of them.
    std::vector<std::vector<Var>> enumerate(std::size_t limit = 1'000'000) const;

    /// Ordering, zero-suppression and uniqueness hold.
    bool check_invariants() const;

    /// "node-id var lo-id hi-id" per line, sinks omitted.
    void dump(std::ostream& out) const;

private:
    friend class ZddBuilder;
    std::vector<ZddNode> nodes_;
    NodeRef root_ = kFalse;
    Var universe_ = 0;
};

/// Arena with a unique table. make() applies zero-suppression (hi == FALSE
/// collapses to lo) and hash-consing.
class ZddBuilder {
public:
    explicit ZddBuilder(Var universe, std::size_t max_nodes = kDefaultZddNodeCap, CostCounter* counter = nullptr);
    ~ZddBuilder();
    ZddBuilder(const ZddBuilder&) = delete;
    ZddBuilder& operator=(const ZddBuilder&) = delete;

    NodeRef make(Var var, NodeRef lo, NodeRef hi);
    const ZddNode& node(NodeRef r) const;
    std::size_t size() const;
    Zdd finish(NodeRef root) &&;

private:
    struct Impl;
    Impl* impl_;
};

/// Family { {v} : v in vars } over variables 1..universe. Throws
/// unsatisfiable for an empty list.
Zdd exactly_one_zdd(std::span<const Var> vars, Var universe);
Zdd exactly_one_zdd(std::span<const Var> vars);

/// Constraint form: all subsets of {1..universe} with exactly one member in
/// `vars`, every other variable unconstrained. Intersecting these is what
/// yields the perfect matchings.
Zdd exactly_one_constraint(std::span<const Var> vars, Var universe);

/// Family intersection via memoized binary apply.
Zdd meld_intersection(const Zdd& a, const Zdd& b, CostCounter* counter = nullptr,
                      std::size_t max_nodes = kDefaultZddNodeCap);

/// Perfect matchings of support(p): the simultaneous meld of the n row and n
/// column exactly-one constraints. The meld state of all 2n operands is
/// encoded as the set of used columns, so it is built in one top-down pass.
/// Empty family (not an error) when no perfect matching exists. n <= 64.
Zdd build_matching_zdd(const WeightMatrix& p, CostCounter* counter = nullptr,
                       std::size_t max_nodes = kDefaultZddNodeCap);

/// Same family, built by folding meld_intersection over the row constraints
/// (ascending) and then the column constraints (ascending).
Zdd build_matching_zdd_pairwise(const WeightMatrix& p, CostCounter* counter = nullptr,
                                std::size_t max_nodes = kDefaultZddNodeCap);

/// Bottom-up pass: count(node) = w(var) * count(hi) + count(lo), TRUE = 1,
/// FALSE = 0. weights[v - 1] is the weight of variable v.
LogValue weighted_count(const Zdd& z, std::span<const double> weights, CostCounter* counter = nullptr);

/// Weights taken from the stored entries of p (variable e + 1 <-> entry e).
LogValue weighted_count(const Zdd& z, const WeightMatrix& p, CostCounter* counter = nullptr);

/// build_matching_zdd + weighted_count.
LogValue zdd_permanent(const WeightMatrix& p, CostCounter* counter = nullptr,
                       std::size_t max_nodes = kDefaultZddNodeCap);

}  // namespace fracperm
