#include "cid/table.hpp"

#include <numeric>
#include <string>

namespace cid {

std::size_t domain_size(std::span<const int> arity, std::size_t budget) {
    std::size_t n = 1;
    for (int a : arity) {
        if (a < 1) throw InputError("arity must be positive");
        if (n > budget / static_cast<std::size_t>(a)) {
            throw ResourceError("product domain exceeds the enumeration budget of " +
                                std::to_string(budget) + " states");
        }
        n *= static_cast<std::size_t>(a);
    }
    return n;
}

JointTable::JointTable(VarSet vars, std::vector<int> arity)
    : vars_(std::move(vars)), arity_(std::move(arity)) {
    if (arity_.size() != vars_.size()) throw InputError("JointTable: arity/vars size mismatch");
    data_.assign(domain_size(arity_), 0.0);
}

std::size_t JointTable::index(std::span<const int> values) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < arity_.size(); ++i) {
        idx = idx * static_cast<std::size_t>(arity_[i]) + static_cast<std::size_t>(values[i]);
    }
    return idx;
}

void JointTable::decode(std::size_t index, std::span<int> values) const {
    for (std::size_t i = arity_.size(); i-- > 0;) {
        values[i] = static_cast<int>(index % static_cast<std::size_t>(arity_[i]));
        index /= static_cast<std::size_t>(arity_[i]);
    }
}

JointTable JointTable::marginal(const VarSet& keep) const {
    if (!keep.subset_of(vars_)) throw InputError("marginal: variables not in table");
    std::vector<int> keep_arity;
    std::vector<std::size_t> pos;
    for (std::size_t i = 0; i < vars_.size(); ++i) {
        if (keep.contains(vars_[i])) {
            keep_arity.push_back(arity_[i]);
            pos.push_back(i);
        }
    }
    JointTable out(keep, keep_arity);
    std::vector<int> full(vars_.size());
    std::vector<int> part(pos.size());
    for (std::size_t i = 0; i < data_.size(); ++i) {
        decode(i, full);
        for (std::size_t k = 0; k < pos.size(); ++k) part[k] = full[pos[k]];
        out.data_[out.index(part)] += data_[i];
    }
    return out;
}

double JointTable::total() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

}  // namespace cid
