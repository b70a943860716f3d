#include "driftadapt/evaluation.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "driftadapt/binio.hpp"
#include "driftadapt/errors.hpp"
#include "driftadapt/trainer.hpp"

namespace driftadapt {

using nlohmann::json;

EvalReport EvalReport::from_confusion(std::string domain_id,
                                      const std::array<std::array<std::size_t, 3>, 3>& confusion) {
    EvalReport r;
    r.domain_id = std::move(domain_id);
    r.confusion = confusion;
    std::size_t total = 0, trace = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) total += confusion[i][j];
        trace += confusion[i][i];
    }
    r.n_samples = total;
    r.accuracy = total == 0 ? 0.0 : static_cast<double>(trace) / static_cast<double>(total);

    double f1_sum = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
        std::size_t predicted = 0, actual = 0;
        for (std::size_t i = 0; i < 3; ++i) {
            predicted += confusion[i][k];
            actual += confusion[k][i];
        }
        const auto tp = static_cast<double>(confusion[k][k]);
        const double denom = static_cast<double>(predicted) + static_cast<double>(actual);
        f1_sum += denom == 0.0 ? 0.0 : 2.0 * tp / denom;
    }
    r.macro_f1 = f1_sum / 3.0;
    return r;
}

EvalReport evaluate(const Network<float>& net, const ParameterStore& params,
                    const std::string& domain_id, const std::vector<EvalSample>& samples) {
    if (samples.empty()) throw std::invalid_argument("evaluate needs a labeled, non-empty sample set");
    std::array<std::array<std::size_t, 3>, 3> confusion{};
    for (const auto& s : samples) {
        if (s.label < 1 || s.label > 3) throw std::invalid_argument("evaluate needs labels in 1..3");
        std::vector<Eigen::MatrixXf> xs{s.x};
        const auto p = net.posteriors(params, xs);
        int pred = 0;
        for (int k = 1; k < static_cast<int>(p.rows()); ++k) {
            if (p(k, 0) > p(pred, 0)) pred = k;  // ties keep the lower class
        }
        confusion[static_cast<std::size_t>(s.label - 1)][static_cast<std::size_t>(pred)]++;
    }
    return EvalReport::from_confusion(domain_id, confusion);
}

std::vector<EvalSample> source_split_samples(const DatasetBundle& data, Split split) {
    std::vector<EvalSample> out;
    for (const auto& d : data.sources) {
        for (const auto& s : d.samples) {
            if (s.split != split) continue;
            EvalSample e;
            e.x = sample_to_input<float>(s, d.length);
            e.label = s.label;
            out.push_back(std::move(e));
        }
    }
    return out;
}

std::vector<EvalSample> target_samples(const DatasetBundle& data,
                                       const std::vector<std::uint8_t>& eval_labels) {
    if (eval_labels.size() != data.target.samples.size()) {
        throw std::invalid_argument("eval label count does not match the target domain");
    }
    std::vector<EvalSample> out;
    out.reserve(eval_labels.size());
    for (std::size_t i = 0; i < eval_labels.size(); ++i) {
        EvalSample e;
        e.x = sample_to_input<float>(data.target.samples[i], data.target.length);
        e.label = static_cast<int>(eval_labels[i]);
        out.push_back(std::move(e));
    }
    return out;
}

ComparisonReport compare_models(const Network<float>& net, const ParameterStore& baseline,
                                const ParameterStore& adapted, const DatasetBundle& data,
                                const std::vector<std::uint8_t>& target_eval_labels) {
    const auto source_test = source_split_samples(data, Split::Test);
    const auto target = target_samples(data, target_eval_labels);
    ComparisonReport r;
    r.baseline_source = evaluate(net, baseline, "source_pooled_test", source_test);
    r.baseline_target = evaluate(net, baseline, "target_story1", target);
    r.adapted_source = evaluate(net, adapted, "source_pooled_test", source_test);
    r.adapted_target = evaluate(net, adapted, "target_story1", target);
    r.target_accuracy_delta = r.adapted_target.accuracy - r.baseline_target.accuracy;
    return r;
}

namespace {

// Accuracy-style values print with exactly 4 decimal places; exact values
// are recoverable from the integer confusion matrix.
std::string round4(double v) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(4) << v;
    return ss.str();
}

json report_to_json(const EvalReport& r) {
    json confusion = json::array();
    for (const auto& row : r.confusion) confusion.push_back(row);
    return json{{"domain_id", r.domain_id},
                {"n_samples", r.n_samples},
                {"confusion", confusion},
                {"accuracy", round4(r.accuracy)},
                {"macro_f1", round4(r.macro_f1)}};
}

EvalReport report_from_json(const json& j) {
    std::array<std::array<std::size_t, 3>, 3> confusion{};
    const auto& c = j.at("confusion");
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t k = 0; k < 3; ++k) confusion[i][k] = c.at(i).at(k).get<std::size_t>();
    }
    return EvalReport::from_confusion(j.at("domain_id").get<std::string>(), confusion);
}

std::string confusion_csv(const EvalReport& r) {
    std::ostringstream out;
    out << "predicted_1,predicted_2,predicted_3\n";
    for (const auto& row : r.confusion) {
        out << row[0] << "," << row[1] << "," << row[2] << "\n";
    }
    return out.str();
}

}  // namespace

void emit_report(const std::vector<EvalReport>& reports, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json domains = json::array();
    for (const auto& r : reports) {
        domains.push_back(report_to_json(r));
        write_text_file(dir / ("confusion_" + r.domain_id + ".csv"), confusion_csv(r));
    }
    write_text_file(dir / "report.json", json{{"domains", domains}}.dump(2) + "\n");
}

void emit_comparison(const ComparisonReport& r, const std::filesystem::path& path) {
    json j{{"baseline", {{"source", report_to_json(r.baseline_source)},
                         {"target", report_to_json(r.baseline_target)}}},
           {"adapted", {{"source", report_to_json(r.adapted_source)},
                        {"target", report_to_json(r.adapted_target)}}},
           {"target_accuracy_delta", round4(r.target_accuracy_delta)}};
    write_text_file(path, j.dump(2) + "\n");
}

std::vector<EvalReport> parse_report(const std::filesystem::path& path) {
    const json j = json::parse(read_text_file(path));
    std::vector<EvalReport> out;
    for (const auto& d : j.at("domains")) out.push_back(report_from_json(d));
    return out;
}

ComparisonReport parse_comparison(const std::filesystem::path& path) {
    const json j = json::parse(read_text_file(path));
    ComparisonReport r;
    r.baseline_source = report_from_json(j.at("baseline").at("source"));
    r.baseline_target = report_from_json(j.at("baseline").at("target"));
    r.adapted_source = report_from_json(j.at("adapted").at("source"));
    r.adapted_target = report_from_json(j.at("adapted").at("target"));
    r.target_accuracy_delta = r.adapted_target.accuracy - r.baseline_target.accuracy;
    return r;
}

}  // namespace driftadapt
