#include "nsnmf/activation.hpp"

#include <cmath>
#include <string>

#include "nsnmf/errors.hpp"

namespace nsnmf {

Activation parse_activation(std::string_view tag) {
    if (tag == "relu") return Activation::relu;
    if (tag == "softplus") return Activation::softplus;
    if (tag == "identity") return Activation::identity;
    throw ConfigError("unknown activation '" + std::string(tag) + "'");
}

std::string_view activation_name(Activation kind) {
    switch (kind) {
        case Activation::relu: return "relu";
        case Activation::softplus: return "softplus";
        case Activation::identity: return "identity";
    }
    return "relu";
}

namespace detail {

double apply_unchecked(Activation kind, double x) noexcept {
    switch (kind) {
        case Activation::relu: return x > 0.0 ? x : 0.0;
        // log(1 + e^x) = max(x, 0) + log1p(e^-|x|) never overflows.
        case Activation::softplus: return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::fabs(x)));
        case Activation::identity: return x;
    }
    return x;
}

double derivative_unchecked(Activation kind, double x) noexcept {
    switch (kind) {
        case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::softplus:
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            else {
                const double e = std::exp(x);
                return e / (1.0 + e);
            }
        case Activation::identity: return 1.0;
    }
    return 1.0;
}

}  // namespace detail

double apply(Activation kind, double x) {
    if (!std::isfinite(x)) throw NumericDomainError("activation input is not finite");
    return detail::apply_unchecked(kind, x);
}

double derivative(Activation kind, double x) {
    if (!std::isfinite(x)) throw NumericDomainError("activation input is not finite");
    return detail::derivative_unchecked(kind, x);
}

}  // namespace nsnmf
