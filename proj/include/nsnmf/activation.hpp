#pragma once

#include <string_view>

namespace nsnmf {

/// Element-wise non-linearity g applied between item factor layers.
enum class Activation { relu, softplus, identity };

Activation parse_activation(std::string_view tag);
std::string_view activation_name(Activation kind);

/// g(x). Throws NumericDomainError for non-finite x.
double apply(Activation kind, double x);

/// g'(x); relu'(0) is taken as 0.
double derivative(Activation kind, double x);

namespace detail {

// Unchecked versions for the training inner loop.
double apply_unchecked(Activation kind, double x) noexcept;
double derivative_unchecked(Activation kind, double x) noexcept;

}  // namespace detail

}  // namespace nsnmf
