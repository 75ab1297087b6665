#include "dpacq/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dpacq/error.hpp"

namespace dpacq {
namespace {

using nlohmann::json;

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

json to_json_vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }
Eigen::VectorXd from_json_vec(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json props(const PropertyVector& p) {
    std::vector<double> f(9);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) f[static_cast<std::size_t>(3 * r + c)] = p.full(r, c);
    return f;
}

PropertyVector props(const json& j) {
    const auto f = j.get<std::vector<double>>();
    if (f.size() != 9) throw FormatError("checkpoint property tensor must have 9 entries");
    PropertyVector p;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) p.full(r, c) = f[static_cast<std::size_t>(3 * r + c)];
    p.C11 = p.full(0, 0);
    p.C12 = p.full(0, 1);
    p.C22 = p.full(1, 1);
    p.C33 = p.full(2, 2);
    return p;
}

Stage stage_from(int s) {
    if (s < 1 || s > 3) throw FormatError("checkpoint stage out of range");
    return static_cast<Stage>(s);
}

}  // namespace

std::string checkpoint_to_string(const Checkpoint& cp) {
    const AcquisitionState& s = cp.state;
    json j;
    j["format"] = "dpacq-checkpoint-1";
    j["fingerprint"] = cp.fingerprint;
    j["stage"] = static_cast<int>(s.stage);
    j["iteration"] = s.iteration;
    j["below_tau1"] = s.below_tau1;
    j["below_tau2"] = s.below_tau2;
    j["finished"] = s.finished;
    j["stop_reason"] = s.stop_reason;
    j["gp_train_count"] = s.gp_train_count;
    if (s.gp) {
        // Rebuilt on resume from omega, the nugget and the training rows; the rest is informational.
        json g;
        g["omega"] = to_json_vec(s.gp->omega);
        g["beta"] = to_json_vec(s.gp->beta.transpose());
        g["sigma"] = to_json_vec(Eigen::Map<const Eigen::VectorXd>(s.gp->sigma.data(), s.gp->sigma.size()));
        g["nugget"] = s.gp->nugget;
        g["train_rows"] = s.gp->train_rows;
        j["gp"] = g;
    }
    json sel = json::array();
    for (const auto& it : s.selected) {
        sel.push_back({{"item", it.item},
                       {"props", props(it.props)},
                       {"tag", it.tag == BatchTag::shape ? "shape" : "property"},
                       {"iteration", it.iteration}});
    }
    j["selected"] = sel;
    json om = json::array();
    for (const auto& w : s.omega_history) om.push_back(to_json_vec(w));
    j["omega_history"] = om;
    j["residual_history"] = s.residual_history;
    j["shape_conditioning"] = s.shape_conditioning;
    j["sampling_rng"] = save_engine(s.sampling_rng);
    j["gp_rng"] = save_engine(s.gp_rng);
    json hist = json::array();
    for (const auto& h : s.history) {
        hist.push_back({{"iter", h.iter},
                        {"stage", static_cast<int>(h.stage)},
                        {"n_selected", h.n_selected},
                        {"residual", number(h.residual)},
                        {"gain_shape", number(h.gain_shape)},
                        {"gain_property", number(h.gain_property)}});
    }
    j["history"] = hist;
    return j.dump();
}

Checkpoint checkpoint_from_string(const std::string& text) {
    Checkpoint cp;
    try {
        const json j = json::parse(text);
        if (j.at("format") != "dpacq-checkpoint-1") throw FormatError("unknown checkpoint format");
        cp.fingerprint = j.at("fingerprint").get<std::string>();
        AcquisitionState& s = cp.state;
        s.stage = stage_from(j.at("stage").get<int>());
        s.iteration = j.at("iteration").get<int>();
        s.below_tau1 = j.at("below_tau1").get<int>();
        s.below_tau2 = j.at("below_tau2").get<int>();
        s.finished = j.at("finished").get<bool>();
        s.stop_reason = j.at("stop_reason").get<std::string>();
        s.gp_train_count = j.at("gp_train_count").get<int>();
        if (j.contains("gp")) s.gp_nugget = j.at("gp").at("nugget").get<double>();
        for (const auto& it : j.at("selected")) {
            SelectedItem si;
            si.item = it.at("item").get<int>();
            si.props = props(it.at("props"));
            si.tag = it.at("tag") == "shape" ? BatchTag::shape : BatchTag::property;
            si.iteration = it.at("iteration").get<int>();
            s.selected.push_back(si);
        }
        for (const auto& w : j.at("omega_history")) s.omega_history.push_back(from_json_vec(w));
        s.residual_history = j.at("residual_history").get<std::vector<double>>();
        s.shape_conditioning = j.at("shape_conditioning").get<std::vector<std::vector<int>>>();
        load_engine(s.sampling_rng, j.at("sampling_rng").get<std::string>());
        load_engine(s.gp_rng, j.at("gp_rng").get<std::string>());
        for (const auto& h : j.at("history")) {
            HistoryRow r;
            r.iter = h.at("iter").get<int>();
            r.stage = stage_from(h.at("stage").get<int>());
            r.n_selected = h.at("n_selected").get<int>();
            r.residual = number(h.at("residual"));
            r.gain_shape = number(h.at("gain_shape"));
            r.gain_property = number(h.at("gain_property"));
            s.history.push_back(r);
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed checkpoint: ") + e.what());
    }
    return cp;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& cp) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write checkpoint " + tmp.string());
        os << checkpoint_to_string(cp);
        if (!os) throw IoError("failed writing checkpoint " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place: " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read checkpoint " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return checkpoint_from_string(ss.str());
}

}  // namespace dpacq
