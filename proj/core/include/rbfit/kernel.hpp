#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rbfit {

/// Compactly supported Wendland kernels for up to three space dimensions.
/// Each is a truncated-power polynomial in t = alpha*r that is exactly zero
/// for t >= 1, so the support radius is 1/alpha and design matrices built
/// from them are sparse whenever supports do not cover the whole domain.
///
///   wendland_3_0 : (1-t)^2                            C^0
///   wendland_3_1 : (1-t)^4 (4t+1)                     C^2
///   wendland_3_3 : (1-t)^8 (32t^3 + 25t^2 + 8t + 1)   C^6
///
/// Adding another family means one enum entry, one case in evaluate(), and
/// one row in the name table; nothing else in the library keys on the set.
enum class KernelFamily {
    wendland_3_0,
    wendland_3_1,
    wendland_3_3,
};

KernelFamily kernel_from_name(std::string_view name);  // throws on unknown name
std::string_view kernel_name(KernelFamily family);

class KernelSpec {
  public:
    /// alpha is the inverse support radius; must be positive and finite.
    KernelSpec(KernelFamily family, double alpha);

    KernelFamily family() const { return family_; }
    double alpha() const { return alpha_; }
    double support_radius() const { return 1.0 / alpha_; }

    /// phi(r) for r >= 0; exactly 1 at r = 0, exactly 0 for alpha*r >= 1,
    /// monotone non-increasing and within [0, 1] in between.
    /// Throws std::domain_error for negative or non-finite r.
    double evaluate(double r) const {
        if (!(r >= 0.0) || !std::isfinite(r))
            throw std::domain_error("kernel evaluate: radius must be finite and non-negative");
        const double t = alpha_ * r;
        if (!(t < 1.0)) return 0.0;  // truncation, handles t == 1 too
        const double u = 1.0 - t;
        switch (family_) {
            case KernelFamily::wendland_3_0:
                return u * u;
            case KernelFamily::wendland_3_1: {
                const double u2 = u * u;
                return u2 * u2 * (4.0 * t + 1.0);
            }
            case KernelFamily::wendland_3_3: {
                const double u2 = u * u;
                const double u4 = u2 * u2;
                return u4 * u4 * (((32.0 * t + 25.0) * t + 8.0) * t + 1.0);
            }
        }
        return 0.0;  // unreachable
    }

    double operator()(double r) const { return evaluate(r); }

  private:
    KernelFamily family_;
    double alpha_;
};

}  // namespace rbfit
