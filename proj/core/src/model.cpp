#include "rbfit/model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "rbfit/kdtree.hpp"

namespace rbfit {

namespace {

constexpr std::string_view kMagic = "rbfit model";
constexpr int kFormatVersion = 1;

void append_double(std::string& out, double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    out.append(buf, ptr);
}

double expect_double(std::istringstream& in, const std::filesystem::path& path,
                     const char* what) {
    std::string tok;
    double v = 0.0;
    if (!(in >> tok))
        throw std::runtime_error("model file '" + path.string() + "': missing " + what);
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
        throw std::runtime_error("model file '" + path.string() + "': bad " + what + " '" +
                                 tok + "'");
    return v;
}

void check_model(const Model& model) {
    if (model.refs.empty()) throw std::invalid_argument("model has no reference points");
    if (model.weights.size() != model.refs.size())
        throw std::invalid_argument("model weight count does not match reference count");
}

// Predictions with an extra translation applied to the queries first; the
// zero-delta path is used for clouds already in the model's fitting frame so
// training residuals reproduce bit for bit.
std::vector<double> evaluate_shifted(const Model& model, std::span<const Point2> queries,
                                     Point2 delta) {
    check_model(model);
    PointIndex ref_index(model.refs);
    const double radius = model.kernel.support_radius();
    std::vector<double> out;
    out.reserve(queries.size());
    std::vector<PointIndex::Neighbor> hits;
    for (const Point2 q : queries) {
        if (!finite(q)) throw std::invalid_argument("evaluate_model: non-finite query point");
        const Point2 p{q.x + delta.x, q.y + delta.y};
        ref_index.radius_query(p, radius, hits);
        double f = 0.0;
        for (const auto& nb : hits)
            f += model.weights[nb.index] * model.kernel.evaluate(nb.distance);
        if (model.poly) {
            const auto& a = *model.poly;
            f += a[0] * p.x + a[1] * p.y + a[2];
        }
        out.push_back(f);
    }
    return out;
}

}  // namespace

void save_model(const Model& model, const std::filesystem::path& path) {
    check_model(model);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    std::string text;
    text.append(kMagic);
    text.push_back(' ');
    text.append(std::to_string(kFormatVersion));
    text.push_back('\n');
    text.append("kernel ").append(kernel_name(model.kernel.family())).push_back('\n');
    text.append("alpha ");
    append_double(text, model.kernel.alpha());
    text.push_back('\n');
    text.append("offset ");
    append_double(text, model.offset.x);
    text.push_back(' ');
    append_double(text, model.offset.y);
    text.push_back('\n');
    text.append("poly ").append(model.poly ? "1" : "0").push_back('\n');
    if (model.poly) {
        text.append("poly-coeffs ");
        append_double(text, (*model.poly)[0]);
        text.push_back(' ');
        append_double(text, (*model.poly)[1]);
        text.push_back(' ');
        append_double(text, (*model.poly)[2]);
        text.push_back('\n');
    }
    text.append("refs ").append(std::to_string(model.refs.size())).push_back('\n');
    for (std::size_t j = 0; j < model.refs.size(); ++j) {
        append_double(text, model.refs[j].x);
        text.push_back(' ');
        append_double(text, model.refs[j].y);
        text.push_back(' ');
        append_double(text, model.weights[j]);
        text.push_back('\n');
    }
    out << text;
    if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
    const auto fail = [&](const std::string& what) -> std::runtime_error {
        return std::runtime_error("model file '" + path.string() + "': " + what);
    };

    std::string line;
    if (!std::getline(in, line) || line.rfind(kMagic, 0) != 0)
        throw fail("not a model file (missing '" + std::string(kMagic) + "' header)");
    {
        std::istringstream header(line.substr(kMagic.size()));
        int version = -1;
        if (!(header >> version)) throw fail("missing format version");
        if (version != kFormatVersion)
            throw fail("unsupported format version " + std::to_string(version));
    }

    const auto next_field = [&](const char* key) -> std::istringstream {
        if (!std::getline(in, line)) throw fail(std::string("missing '") + key + "' line");
        std::istringstream ls(line);
        std::string k;
        ls >> k;
        if (k != key) throw fail("expected '" + std::string(key) + "', got '" + k + "'");
        return ls;
    };

    auto ls = next_field("kernel");
    std::string kname;
    if (!(ls >> kname)) throw fail("missing kernel name");
    KernelFamily family;
    try {
        family = kernel_from_name(kname);
    } catch (const std::invalid_argument& e) {
        throw fail(e.what());
    }

    ls = next_field("alpha");
    const double alpha = expect_double(ls, path, "alpha");

    ls = next_field("offset");
    Point2 offset{expect_double(ls, path, "offset x"), expect_double(ls, path, "offset y")};

    ls = next_field("poly");
    int poly_flag = -1;
    if (!(ls >> poly_flag) || (poly_flag != 0 && poly_flag != 1))
        throw fail("poly flag must be 0 or 1");

    std::optional<std::array<double, 3>> poly;
    if (poly_flag == 1) {
        ls = next_field("poly-coeffs");
        poly = {{expect_double(ls, path, "poly coefficient"),
                 expect_double(ls, path, "poly coefficient"),
                 expect_double(ls, path, "poly coefficient")}};
    }

    ls = next_field("refs");
    std::size_t m = 0;
    if (!(ls >> m) || m == 0) throw fail("bad reference count");

    Model model{KernelSpec(family, alpha), {}, {}, poly, offset};
    model.refs.reserve(m);
    model.weights.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
        if (!std::getline(in, line)) throw fail("truncated reference list");
        std::istringstream rs(line);
        const double x = expect_double(rs, path, "reference x");
        const double y = expect_double(rs, path, "reference y");
        const double w = expect_double(rs, path, "weight");
        model.refs.push_back({x, y});
        model.weights.push_back(w);
    }
    return model;
}

std::vector<double> evaluate_model(const Model& model, std::span<const Point2> queries) {
    return evaluate_shifted(model, queries, {-model.offset.x, -model.offset.y});
}

ErrorReport error_report(const Model& model, const PointCloud& cloud,
                         std::optional<std::size_t> design_nnz) {
    if (cloud.size() == 0) throw std::invalid_argument("error_report: empty cloud");
    if (cloud.values.size() != cloud.points.size())
        throw std::invalid_argument("error_report: cloud value count mismatch");
    // Map the cloud's frame into the model's fitting frame. Matching frames
    // give delta == 0 and predictions identical to the training design.
    const Point2 delta{cloud.offset.x - model.offset.x, cloud.offset.y - model.offset.y};
    const std::vector<double> f = evaluate_shifted(model, cloud.points, delta);

    ErrorReport report;
    report.signed_errors.resize(cloud.size());
    double abs_sum = 0.0;
    double norm_sum = 0.0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const double e = f[i] - cloud.values[i];
        report.signed_errors[i] = e;
        abs_sum += std::abs(e);
        norm_sum += std::abs(cloud.values[i]);
    }
    const double n = static_cast<double>(cloud.size());
    report.mean_absolute_error = abs_sum / n;
    double var_sum = 0.0;
    for (const double e : report.signed_errors) {
        const double d = std::abs(e) - report.mean_absolute_error;
        var_sum += d * d;
    }
    report.deviation_of_error = var_sum / n;
    const double normalizer = norm_sum / n;
    report.mean_relative_error_pct =
        normalizer > 0.0 ? 100.0 * report.mean_absolute_error / normalizer : 0.0;
    if (design_nnz) {
        const double cells = n * static_cast<double>(model.refs.size());
        report.density_pct = 100.0 * static_cast<double>(*design_nnz) / cells;
    }
    return report;
}

void write_signed_errors(const PointCloud& cloud, std::span<const double> predictions,
                         const std::filesystem::path& path) {
    if (predictions.size() != cloud.size())
        throw std::invalid_argument("write_signed_errors: prediction count mismatch");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    std::string line;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        line.clear();
        append_double(line, cloud.points[i].x + cloud.offset.x);
        line.push_back(' ');
        append_double(line, cloud.points[i].y + cloud.offset.y);
        line.push_back(' ');
        append_double(line, cloud.values[i]);
        line.push_back(' ');
        append_double(line, predictions[i]);
        line.push_back(' ');
        append_double(line, predictions[i] - cloud.values[i]);
        line.push_back('\n');
        out << line;
    }
    if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

}  // namespace rbfit
