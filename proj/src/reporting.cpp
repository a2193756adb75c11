#include "textrisk/reporting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "textrisk/error.hpp"

namespace textrisk {

namespace {

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::data, "cannot write " + path.string());
    out << text;
}

constexpr const char* kStyle =
    "body{font-family:Georgia,serif;max-width:60em;margin:2em auto;line-height:1.9}"
    ".w{padding:0.1em 0.15em;border-radius:2px}"
    ".bar{display:flex;align-items:center;gap:0.5em;margin:1em 0;font-size:0.8em}"
    ".grad{width:16em;height:1em;background:linear-gradient(to right,rgba(220,20,60,0),rgba(220,20,60,1))}"
    "table{border-collapse:collapse}td,th{padding:0.2em 0.8em;border-bottom:1px solid #ccc;text-align:right}"
    "td:first-child,th:first-child{text-align:left}";

std::string colorbar() {
    return "<div class=\"bar\"><span>0</span><div class=\"grad\"></div><span>100</span></div>\n";
}

} // namespace

std::vector<double> token_intensities(std::span<const double> alpha, const BlockSequence& blocks,
                                      std::size_t num_tokens) {
    require(alpha.size() == static_cast<std::size_t>(blocks.num_blocks), ErrorKind::data,
            "attention weights and blocks differ in count");
    std::vector<double> out(num_tokens, 0.0);
    double top = 0.0;
    for (double a : alpha) top = std::max(top, a);
    if (top <= 0.0 || num_tokens == 0) return out;
    for (int t = 0; t < blocks.num_blocks; ++t) {
        const std::size_t lo = blocks.offsets[static_cast<std::size_t>(t)];
        const std::size_t hi = std::min(num_tokens, lo + static_cast<std::size_t>(blocks.block_size));
        for (std::size_t i = lo; i < hi; ++i) out[i] = std::max(out[i], alpha[static_cast<std::size_t>(t)]);
    }
    for (double& v : out) v = std::clamp(100.0 * v / top, 0.0, 100.0);
    return out;
}

HeatmapDoc build_heatmap(std::string record_id, std::string segment, std::span<const std::string> tokens,
                         std::span<const double> intensities, std::span<const std::string> source_words,
                         std::span<const std::size_t> source) {
    require(tokens.size() == intensities.size(), ErrorKind::data, "heatmap tokens and intensities differ in count");
    HeatmapDoc doc{std::move(record_id), std::move(segment), {}};
    if (source_words.empty() || source.size() != tokens.size()) {
        for (std::size_t i = 0; i < tokens.size(); ++i) doc.words.push_back({tokens[i], intensities[i]});
        return doc;
    }
    doc.words.reserve(source_words.size());
    for (const auto& w : source_words) doc.words.push_back({w, 0.0});
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        require(source[i] < source_words.size(), ErrorKind::data, "token alignment points past the source text");
        auto& word = doc.words[source[i]];
        word.intensity = std::max(word.intensity, intensities[i]);
    }
    return doc;
}

std::string html_escape(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&#39;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string render_heatmap(const HeatmapDoc& doc) {
    std::ostringstream out;
    out << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>"
        << html_escape(doc.record_id) << "</title>\n<style>" << kStyle << "</style>\n</head>\n<body>\n";
    out << "<h1>" << html_escape(doc.record_id) << "</h1>\n<p>Segment: " << html_escape(doc.segment) << "</p>\n";
    out << colorbar() << "<p>\n";
    for (std::size_t i = 0; i < doc.words.size(); ++i) {
        const auto& w = doc.words[i];
        if (i > 0) out << ' ';
        out << "<span class=\"w\" title=\"" << fmt("%.1f", w.intensity) << "\" style=\"background:rgba(220,20,60,"
            << fmt("%.3f", w.intensity / 100.0) << ")\">" << html_escape(w.text) << "</span>";
    }
    out << "\n</p>\n</body>\n</html>\n";
    return out.str();
}

nlohmann::json metrics_json(const RunReport& report) {
    nlohmann::json j;
    j["evaluation"] = report.evaluation ? report.evaluation->to_json() : nlohmann::json(nullptr);
    nlohmann::json training = nlohmann::json::object();
    for (const auto& [name, log] : report.training_logs) {
        nlohmann::json epochs = nlohmann::json::array();
        for (const auto& e : log.epochs) {
            epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
        }
        training[name] = {{"best_epoch", log.best_epoch}, {"epochs", epochs}};
    }
    j["training"] = training;
    return j;
}

namespace {

std::string loss_curve_svg(const std::string& name, const TrainingLog& log) {
    constexpr double W = 360, H = 160, pad = 30;
    std::ostringstream out;
    out << "<figure><figcaption>" << html_escape(name) << "</figcaption>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\""
        << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\" stroke=\"#999\"/>\n";
    if (!log.epochs.empty()) {
        double lo = log.epochs.front().train_loss, hi = lo;
        for (const auto& e : log.epochs) {
            for (double v : {e.train_loss, e.val_loss}) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        if (hi - lo < 1e-12) hi = lo + 1.0;
        const double n = static_cast<double>(std::max<std::size_t>(log.epochs.size() - 1, 1));
        auto line = [&](bool val, const char* color) {
            out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
            for (std::size_t i = 0; i < log.epochs.size(); ++i) {
                const double v = val ? log.epochs[i].val_loss : log.epochs[i].train_loss;
                const double x = pad + (W - 2 * pad) * static_cast<double>(i) / n;
                const double y = H - pad - (H - 2 * pad) * (v - lo) / (hi - lo);
                out << (i ? " " : "") << fmt("%.2f", x) << ',' << fmt("%.2f", y);
            }
            out << "\"/>\n";
        };
        line(false, "#1f77b4");
        line(true, "#d62728");
        out << "<text x=\"" << pad << "\" y=\"14\" font-size=\"11\">loss " << fmt("%.4f", lo) << " to "
            << fmt("%.4f", hi) << " (blue train, red validation)</text>\n";
    }
    out << "</svg></figure>\n";
    return out.str();
}

} // namespace

std::string render_run_report(const RunReport& report) {
    std::ostringstream out;
    out << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>textrisk run report</title>\n"
        << "<style>" << kStyle << "</style>\n</head>\n<body>\n<h1>Run report</h1>\n";

    out << "<h2>Evaluation</h2>\n";
    if (report.evaluation) {
        const auto& ev = *report.evaluation;
        std::vector<std::string> refs;
        for (const auto& m : ev.models) {
            for (const auto& c : ev.comparisons) {
                if (c.reference == m.name) {
                    refs.push_back(m.name);
                    break;
                }
            }
        }
        for (const auto& c : ev.comparisons) {
            if (std::find(refs.begin(), refs.end(), c.reference) == refs.end()) refs.push_back(c.reference);
        }
        out << "<p>Folds: " << html_escape(ev.strategy);
        if (ev.size_threshold) out << ", firm size &gt; " << fmt("%.17g", *ev.size_threshold);
        out << "</p>\n<table>\n<tr><th>model</th><th>mean AUC</th><th>se</th><th>mean log score</th><th>se</th>";
        for (const auto& r : refs) out << "<th>p vs " << html_escape(r) << "</th>";
        out << "</tr>\n";
        for (const auto& m : ev.models) {
            out << "<tr><td>" << html_escape(m.name) << "</td><td>" << fmt("%.17g", m.mean_auc) << "</td><td>"
                << fmt("%.17g", m.se_auc) << "</td><td>" << fmt("%.17g", m.mean_log_score) << "</td><td>"
                << fmt("%.17g", m.se_log_score) << "</td>";
            for (const auto& r : refs) {
                out << "<td>";
                for (const auto& c : ev.comparisons) {
                    if (c.model == m.name && c.reference == r) out << fmt("%.17g", c.p_auc);
                }
                if (r == m.name) out << "-";
                out << "</td>";
            }
            out << "</tr>\n";
        }
        out << "</table>\n";
    } else {
        out << "<p>No evaluation was run.</p>\n";
    }

    out << "<h2>Training</h2>\n";
    for (const auto& [name, log] : report.training_logs) out << loss_curve_svg(name, log);

    out << "<h2>Attention heatmaps</h2>\n<ul>\n";
    for (const auto& h : report.heatmaps) {
        out << "<li><a href=\"heatmaps/" << html_escape(h) << "\">" << html_escape(h) << "</a></li>\n";
    }
    out << "</ul>\n<h2>Configuration</h2>\n<pre>" << html_escape(report.config.dump(2)) << "</pre>\n</body>\n</html>\n";
    return out.str();
}

void emit_run_report(const std::filesystem::path& dir, const RunReport& report) {
    std::filesystem::create_directories(dir);
    write_file(dir / "metrics.json", metrics_json(report).dump(2) + "\n");
    write_file(dir / "report.html", render_run_report(report));
}

} // namespace textrisk
