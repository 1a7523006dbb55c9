#include "fracperm/zdd.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include "fracperm/errors.hpp"

namespace fracperm {

namespace {

struct NodeKey {
    Var var;
    NodeRef lo, hi;
    bool operator==(const NodeKey&) const = default;
};

struct NodeKeyHash {
    std::size_t operator()(const NodeKey& k) const noexcept {
        std::uint64_t h = k.var * 0x9E3779B97F4A7C15ULL;
        h ^= (static_cast<std::uint64_t>(k.lo) << 32 | k.hi) + 0x632BE59BD9B4E019ULL + (h << 6) + (h >> 2);
        h ^= h >> 29;
        h *= 0xBF58476D1CE4E5B9ULL;
        return static_cast<std::size_t>(h ^ (h >> 32));
    }
};

std::uint64_t mix_bits(std::uint64_t h) {
    h ^= h >> 29;
    h *= 0xBF58476D1CE4E5B9ULL;
    h ^= h >> 32;
    return h;
}

// Open-addressing map with linear probing. `empty` marks free slots and must
// never be used as a key.
template <class Key, class Hash>
class FlatMap {
public:
    explicit FlatMap(Key empty, std::size_t capacity = 1024) : empty_(empty) { rehash(capacity); }

    NodeRef* find(const Key& k) {
        for (std::size_t i = Hash{}(k) & mask_;; i = (i + 1) & mask_) {
            if (keys_[i] == k) return &values_[i];
            if (keys_[i] == empty_) return nullptr;
        }
    }

    void insert(const Key& k, NodeRef v) {
        if (2 * (size_ + 1) > keys_.size()) rehash(2 * keys_.size());
        std::size_t i = Hash{}(k) & mask_;
        while (!(keys_[i] == empty_)) i = (i + 1) & mask_;
        keys_[i] = k;
        values_[i] = v;
        ++size_;
    }

    std::size_t size() const { return size_; }

    void clear() {
        keys_ = {};
        values_ = {};
        rehash(16);
    }

private:
    void rehash(std::size_t cap) {
        std::vector<Key> old_keys = std::move(keys_);
        std::vector<NodeRef> old_values = std::move(values_);
        keys_.assign(cap, empty_);
        values_.assign(cap, 0);
        mask_ = cap - 1;
        size_ = 0;
        for (std::size_t i = 0; i < old_keys.size(); ++i)
            if (!(old_keys[i] == empty_)) insert(old_keys[i], old_values[i]);
    }

    Key empty_;
    std::vector<Key> keys_;
    std::vector<NodeRef> values_;
    std::size_t mask_ = 0;
    std::size_t size_ = 0;
};

struct MaskHash {
    std::size_t operator()(std::uint64_t k) const noexcept { return static_cast<std::size_t>(mix_bits(k * 0x9E3779B97F4A7C15ULL)); }
};

constexpr ZddNode kSink{Zdd::kSinkVar, 0, 0};

void check_sorted(std::span<const Var> vars, Var universe) {
    for (std::size_t k = 0; k < vars.size(); ++k) {
        if (vars[k] == 0 || vars[k] > universe)
            throw Error(ErrorCode::invalid_argument, "variable id outside 1..universe");
        if (k && vars[k] <= vars[k - 1]) throw Error(ErrorCode::invalid_argument, "variable list must be strictly ascending");
    }
}

}  // namespace

// ---------------------------------------------------------------- Zdd

Zdd::Zdd() : nodes_{kSink, kSink} {}

bool Zdd::contains(std::span<const Var> set) const {
    NodeRef r = root_;
    std::size_t k = 0;
    while (r > kTrue) {
        const ZddNode& nd = nodes_[r];
        if (k < set.size() && set[k] < nd.var) return false;  // skipped variable is forced to 0
        if (k < set.size() && set[k] == nd.var) {
            r = nd.hi;
            ++k;
        } else {
            r = nd.lo;
        }
    }
    return r == kTrue && k == set.size();
}

double Zdd::count() const {
    std::vector<double> c(nodes_.size(), 0.0);
    c[kTrue] = 1.0;
    for (std::size_t id = 2; id < nodes_.size(); ++id) c[id] = c[nodes_[id].lo] + c[nodes_[id].hi];
    return c[root_];
}

std::vector<std::vector<Var>> Zdd::enumerate(std::size_t limit) const {
    std::vector<std::vector<Var>> out;
    std::vector<Var> path;
    std::function<void(NodeRef)> walk = [&](NodeRef r) {
        if (out.size() >= limit || r == kFalse) return;
        if (r == kTrue) {
            out.push_back(path);
            return;
        }
        walk(nodes_[r].lo);
        path.push_back(nodes_[r].var);
        walk(nodes_[r].hi);
        path.pop_back();
    };
    walk(root_);
    std::sort(out.begin(), out.end());
    return out;
}

bool Zdd::check_invariants() const {
    if (nodes_.size() < 2 || root_ >= nodes_.size()) return false;
    std::unordered_set<NodeKey, NodeKeyHash> seen;
    for (std::size_t id = 2; id < nodes_.size(); ++id) {
        const ZddNode& nd = nodes_[id];
        if (nd.hi == kFalse) return false;
        if (nd.lo >= id || nd.hi >= id) return false;
        if (nd.var >= nodes_[nd.lo].var || nd.var >= nodes_[nd.hi].var) return false;
        if (!seen.insert({nd.var, nd.lo, nd.hi}).second) return false;
    }
    return true;
}

void Zdd::dump(std::ostream& out) const {
    out << "# root " << root_ << " universe " << universe_ << '\n';
    for (std::size_t id = 2; id < nodes_.size(); ++id)
        out << id << ' ' << nodes_[id].var << ' ' << nodes_[id].lo << ' ' << nodes_[id].hi << '\n';
}

// ---------------------------------------------------------------- builder

struct ZddBuilder::Impl {
    Zdd zdd;
    FlatMap<NodeKey, NodeKeyHash> unique;
    std::size_t max_nodes;
    CostCounter* counter;
};

ZddBuilder::ZddBuilder(Var universe, std::size_t max_nodes, CostCounter* counter)
    : impl_(new Impl{Zdd{}, FlatMap<NodeKey, NodeKeyHash>{NodeKey{0, 0, 0}}, max_nodes, counter}) {
    impl_->zdd.universe_ = universe;
}

ZddBuilder::~ZddBuilder() { delete impl_; }

NodeRef ZddBuilder::make(Var var, NodeRef lo, NodeRef hi) {
    if (hi == Zdd::kFalse) return lo;
    auto& z = impl_->zdd;
    if (impl_->counter) impl_->counter->read();
    const NodeKey key{var, lo, hi};
    if (const NodeRef* found = impl_->unique.find(key)) return *found;
    if (z.size() >= impl_->max_nodes)
        throw Error(ErrorCode::capacity, "ZDD node cap of " + std::to_string(impl_->max_nodes) + " reached");
    const auto id = static_cast<NodeRef>(z.nodes_.size());
    impl_->unique.insert(key, id);
    z.nodes_.push_back({var, lo, hi});
    if (impl_->counter) {
        impl_->counter->write();
        impl_->counter->check_budget();
    }
    return id;
}

const ZddNode& ZddBuilder::node(NodeRef r) const { return impl_->zdd.nodes_[r]; }

std::size_t ZddBuilder::size() const { return impl_->zdd.size(); }

Zdd ZddBuilder::finish(NodeRef root) && {
    impl_->zdd.root_ = root;
    impl_->unique.clear();
    return std::move(impl_->zdd);
}

// ---------------------------------------------------------------- constraints

Zdd exactly_one_zdd(std::span<const Var> vars, Var universe) {
    if (vars.empty()) throw Error(ErrorCode::unsatisfiable, "exactly-one over an empty variable set");
    check_sorted(vars, universe);
    ZddBuilder b(universe);
    NodeRef r = Zdd::kFalse;
    for (auto it = vars.rbegin(); it != vars.rend(); ++it) r = b.make(*it, r, Zdd::kTrue);
    return std::move(b).finish(r);
}

Zdd exactly_one_zdd(std::span<const Var> vars) {
    return exactly_one_zdd(vars, vars.empty() ? 0 : vars.back());
}

Zdd exactly_one_constraint(std::span<const Var> vars, Var universe) {
    if (vars.empty()) throw Error(ErrorCode::unsatisfiable, "exactly-one over an empty variable set");
    check_sorted(vars, universe);
    // Two chains built from the last variable up: `need` still lacks its
    // member of vars, `done` already has it.
    ZddBuilder b(universe);
    NodeRef need = Zdd::kFalse, done = Zdd::kTrue;
    std::size_t k = vars.size();
    for (Var v = universe; v >= 1; --v) {
        if (k > 0 && vars[k - 1] == v) {
            --k;
            need = b.make(v, need, done);
            // done: v must stay out, which zero-suppression expresses by skipping it
        } else {
            need = b.make(v, need, need);
            done = b.make(v, done, done);
        }
    }
    return std::move(b).finish(need);
}

// ---------------------------------------------------------------- meld

Zdd meld_intersection(const Zdd& a, const Zdd& b, CostCounter* counter, std::size_t max_nodes) {
    ZddBuilder out(std::max(a.universe(), b.universe()), max_nodes, counter);
    std::unordered_map<std::uint64_t, NodeRef> memo;

    std::function<NodeRef(NodeRef, NodeRef)> meet = [&](NodeRef x, NodeRef y) -> NodeRef {
        if (x == Zdd::kFalse || y == Zdd::kFalse) return Zdd::kFalse;
        if (x == Zdd::kTrue && y == Zdd::kTrue) return Zdd::kTrue;
        const std::uint64_t key = static_cast<std::uint64_t>(x) << 32 | y;
        if (counter) counter->read();
        if (auto it = memo.find(key); it != memo.end()) return it->second;
        const ZddNode& nx = a.node(x);
        const ZddNode& ny = b.node(y);
        if (counter) counter->read(2);
        NodeRef r;
        if (nx.var < ny.var) {
            r = meet(nx.lo, y);
        } else if (ny.var < nx.var) {
            r = meet(x, ny.lo);
        } else {
            const NodeRef lo = meet(nx.lo, ny.lo);
            const NodeRef hi = meet(nx.hi, ny.hi);
            r = out.make(nx.var, lo, hi);
        }
        memo.emplace(key, r);
        if (counter) counter->write();
        return r;
    };
    const NodeRef root = meet(a.root(), b.root());
    return std::move(out).finish(root);
}

// ---------------------------------------------------------------- matchings

namespace {

bool has_empty_line(const WeightMatrix& p) {
    const auto& pat = p.pattern();
    for (int i = 0; i < p.n(); ++i)
        if (pat.row_empty(i) || pat.col_empty(i)) return true;
    return false;
}

Zdd empty_family(Var universe) {
    ZddBuilder b(universe);
    return std::move(b).finish(Zdd::kFalse);
}

}  // namespace

Zdd build_matching_zdd(const WeightMatrix& p, CostCounter* counter, std::size_t max_nodes) {
    const int n = p.n();
    if (n > 64) throw Error(ErrorCode::too_large, "build_matching_zdd supports n <= 64");
    const auto& pat = p.pattern();
    const Var m = static_cast<Var>(pat.size());
    if (has_empty_line(p)) return empty_family(m);

    // must_have[i]: columns whose last stored row is above row i. Once row i
    // is reached they have to be matched already.
    std::vector<int> last_row(n, -1);
    for (std::size_t e = 0; e < pat.size(); ++e) last_row[pat.col(e)] = std::max(last_row[pat.col(e)], pat.row(e));
    std::vector<std::uint64_t> must_have(n + 1, 0);
    for (int i = 0; i <= n; ++i)
        for (int c = 0; c < n; ++c)
            if (last_row[c] < i) must_have[i] |= std::uint64_t{1} << c;

    ZddBuilder b(m, max_nodes, counter);
    std::vector<FlatMap<std::uint64_t, MaskHash>> memo(n, FlatMap<std::uint64_t, MaskHash>(~std::uint64_t{0}, 16));

    // Sub-diagram for rows i.. given the set of columns already used. Row i's
    // stored entries form one chain along LO; HI descends to row i + 1.
    std::function<NodeRef(int, std::uint64_t)> rows_from = [&](int i, std::uint64_t used) -> NodeRef {
        if (i == n) return Zdd::kTrue;
        if (must_have[i] & ~used) return Zdd::kFalse;
        if (counter) counter->read();
        if (const NodeRef* hit = memo[i].find(used)) return *hit;
        NodeRef chain = Zdd::kFalse;
        for (std::size_t e = pat.row_end(i); e-- > pat.row_begin(i);) {
            if (counter) counter->read();
            const std::uint64_t bit = std::uint64_t{1} << pat.col(e);
            if (used & bit) continue;
            const NodeRef hi = rows_from(i + 1, used | bit);
            chain = b.make(static_cast<Var>(e + 1), chain, hi);
        }
        memo[i].insert(used, chain);
        if (counter) counter->write();
        return chain;
    };
    const NodeRef root = rows_from(0, 0);
    return std::move(b).finish(root);
}

Zdd build_matching_zdd_pairwise(const WeightMatrix& p, CostCounter* counter, std::size_t max_nodes) {
    const int n = p.n();
    const auto& pat = p.pattern();
    const Var m = static_cast<Var>(pat.size());
    if (has_empty_line(p)) return empty_family(m);

    std::vector<std::vector<Var>> constraints;
    for (int i = 0; i < n; ++i) {
        std::vector<Var> vars;
        for (std::size_t e = pat.row_begin(i); e < pat.row_end(i); ++e) vars.push_back(static_cast<Var>(e + 1));
        constraints.push_back(std::move(vars));
    }
    for (int j = 0; j < n; ++j) {
        std::vector<Var> vars;
        for (std::size_t e : pat.col_edges(j)) vars.push_back(static_cast<Var>(e + 1));
        std::sort(vars.begin(), vars.end());
        constraints.push_back(std::move(vars));
    }
    Zdd acc = exactly_one_constraint(constraints[0], m);
    for (std::size_t k = 1; k < constraints.size(); ++k)
        acc = meld_intersection(acc, exactly_one_constraint(constraints[k], m), counter, max_nodes);
    return acc;
}

// ---------------------------------------------------------------- counting

LogValue weighted_count(const Zdd& z, std::span<const double> weights, CostCounter* counter) {
    const auto nodes = z.nodes();
    std::vector<LogValue> value(nodes.size());
    value[Zdd::kTrue] = LogValue::one();
    for (std::size_t id = 2; id < nodes.size(); ++id) {
        const ZddNode& nd = nodes[id];
        if (nd.var == 0 || nd.var > weights.size() || !(weights[nd.var - 1] > 0.0) || !std::isfinite(weights[nd.var - 1]))
            throw Error(ErrorCode::missing_weight, "no positive weight for variable " + std::to_string(nd.var));
        value[id] = LogValue::from_double(weights[nd.var - 1]) * value[nd.hi] + value[nd.lo];
    }
    if (counter) {
        // per node: the node record, two child memo reads, one memo write
        counter->read(3 * (nodes.size() - 2));
        counter->write(nodes.size() - 2);
    }
    return value[z.root()];
}

LogValue weighted_count(const Zdd& z, const WeightMatrix& p, CostCounter* counter) {
    return weighted_count(z, p.values(), counter);
}

LogValue zdd_permanent(const WeightMatrix& p, CostCounter* counter, std::size_t max_nodes) {
    const Zdd z = build_matching_zdd(p, counter, max_nodes);
    return weighted_count(z, p, counter);
}

}  // namespace fracperm
