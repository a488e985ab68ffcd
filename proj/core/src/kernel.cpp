#include "rbfit/kernel.hpp"

namespace rbfit {

namespace {

struct NameEntry {
    KernelFamily family;
    std::string_view name;
};

// One row per supported family; extend here when adding kernels.
constexpr NameEntry kNames[] = {
    {KernelFamily::wendland_3_0, "wendland-3-0"},
    {KernelFamily::wendland_3_1, "wendland-3-1"},
    {KernelFamily::wendland_3_3, "wendland-3-3"},
};

}  // namespace

KernelFamily kernel_from_name(std::string_view name) {
    for (const auto& e : kNames)
        if (e.name == name) return e.family;
    std::string msg = "unknown kernel '" + std::string(name) + "'; expected one of:";
    for (const auto& e : kNames) msg += " " + std::string(e.name);
    throw std::invalid_argument(msg);
}

std::string_view kernel_name(KernelFamily family) {
    for (const auto& e : kNames)
        if (e.family == family) return e.name;
    throw std::invalid_argument("unknown kernel family");
}

KernelSpec::KernelSpec(KernelFamily family, double alpha) : family_(family), alpha_(alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw std::invalid_argument("kernel shape parameter must be positive and finite");
}

}  // namespace rbfit
