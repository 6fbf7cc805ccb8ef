#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cid/graph.hpp"

namespace cid {

/// Dense table over the product domain of a variable set. Index codec is
/// mixed radix with variables in graph index order, the first variable being
/// the most significant digit.
class JointTable {
public:
    JointTable() = default;
    JointTable(VarSet vars, std::vector<int> arity);

    const VarSet& vars() const { return vars_; }
    const std::vector<int>& arity() const { return arity_; }
    std::size_t size() const { return data_.size(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    const std::vector<double>& data() const { return data_; }

    /// Values listed in vars() order.
    std::size_t index(std::span<const int> values) const;
    void decode(std::size_t index, std::span<int> values) const;
    double at(std::span<const int> values) const { return data_[index(values)]; }

    /// Sums out every variable not in `keep` (keep ⊆ vars()).
    JointTable marginal(const VarSet& keep) const;
    double total() const;

private:
    VarSet vars_;
    std::vector<int> arity_;
    std::vector<double> data_;
};

/// Product of arities, guarded against overflow and an enumeration budget.
std::size_t domain_size(std::span<const int> arity, std::size_t budget = std::size_t{1} << 20);

}  // namespace cid
