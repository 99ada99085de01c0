#ifndef DSPAR_TIN_HPP
#define DSPAR_TIN_HPP

#include <string>
#include <vector>

namespace dspar {

struct Access {
  std::string tensor;
  std::vector<std::string> vars;

  friend bool operator==(const Access&, const Access&) = default;
};

/// A tensor-index-notation assignment: lhs access = sum of products of rhs
/// accesses. Index variables appearing only on the right-hand side are
/// sum-reductions over their domain.
struct TinStatement {
  Access lhs;
  std::vector<std::vector<Access>> terms;
  std::vector<std::string> reduction_vars;
  /// lhs variables in order, then reduction variables in rhs appearance
  /// order; the default loop order.
  std::vector<std::string> vars;

  bool has_var(const std::string& v) const;
  bool is_reduction(const std::string& v) const;

  /// Distinct tensor names, lhs first then rhs appearance order.
  std::vector<std::string> tensor_names() const;
  int tensor_order(const std::string& name) const;

  /// All rhs accesses, term-major.
  std::vector<Access> rhs_accesses() const;

  std::string to_string() const;

  friend bool operator==(const TinStatement&, const TinStatement&) = default;
};

/// Parses `name(vars) = term (+ term)*` with `term = access (* access)*`.
/// `·` is accepted as a synonym for `*`.
TinStatement parse_tin(const std::string& text);

}  // namespace dspar

#endif
