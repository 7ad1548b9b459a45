#include "pipematch/params.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pipematch/errors.hpp"

namespace pipematch {

namespace {

using Member = double ParamVector::*;

struct FieldDef {
    ParamFieldInfo info;
    Member member;
};

const std::array<FieldDef, 27>& field_defs() {
    static const std::array<FieldDef, 27> defs = {{
        {{"h1_gain", 0.0, 1.0, false}, &ParamVector::h1_gain},
        {{"h2_gain", 0.0, 1.0, false}, &ParamVector::h2_gain},
        {{"h1_attack_time_s", 0.005, 1.0, false}, &ParamVector::h1_attack_time_s},
        {{"h1_decay_time_s", 0.01, 2.0, false}, &ParamVector::h1_decay_time_s},
        {{"h1_sustain_level", 0.0, 1.0, false}, &ParamVector::h1_sustain_level},
        {{"h1_overshoot", 1.0, 3.0, false}, &ParamVector::h1_overshoot},
        {{"h2_attack_time_s", 0.005, 1.0, false}, &ParamVector::h2_attack_time_s},
        {{"h2_decay_time_s", 0.01, 2.0, false}, &ParamVector::h2_decay_time_s},
        {{"h2_sustain_level", 0.0, 1.0, false}, &ParamVector::h2_sustain_level},
        {{"h2_overshoot", 1.0, 3.0, false}, &ParamVector::h2_overshoot},
        {{"clip_threshold_h1", 0.05, 1.0, false}, &ParamVector::clip_threshold_h1},
        {{"clip_threshold_h2", 0.05, 1.0, false}, &ParamVector::clip_threshold_h2},
        {{"comb_delay_samples", 1.0, 64.0, true}, &ParamVector::comb_delay_samples},
        {{"comb_gain", -1.0, 1.0, false}, &ParamVector::comb_gain},
        {{"sigmoid_drive", 0.1, 10.0, false}, &ParamVector::sigmoid_drive},
        {{"bandpass_q", 0.5, 20.0, false}, &ParamVector::bandpass_q},
        {{"bandpass_wet", 0.0, 1.0, false}, &ParamVector::bandpass_wet},
        {{"noise_gain", 0.0, 1.0, false}, &ParamVector::noise_gain},
        {{"noise_lp_cutoff_hz", 200.0, 8000.0, false}, &ParamVector::noise_lp_cutoff_hz},
        {{"granulation_depth", 0.0, 1.0, false}, &ParamVector::granulation_depth},
        {{"fdn_feedback", 0.0, 0.98, false}, &ParamVector::fdn_feedback},
        {{"turbulence_depth_cents", 0.0, 50.0, false}, &ParamVector::turbulence_depth_cents},
        {{"turbulence_time_s", 0.005, 0.5, false}, &ParamVector::turbulence_time_s},
        {{"dwg_loss_cutoff_hz", 500.0, 12000.0, false}, &ParamVector::dwg_loss_cutoff_hz},
        {{"dwg_feedback", 0.9, 0.9999, false}, &ParamVector::dwg_feedback},
        {{"dispersion_coeff", -0.9, 0.9, false}, &ParamVector::dispersion_coeff},
        {{"dc_block_pole", 0.9, 0.9999, false}, &ParamVector::dc_block_pole},
    }};
    return defs;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

const std::array<ParamFieldInfo, 27>& param_fields() {
    static const std::array<ParamFieldInfo, 27> infos = [] {
        std::array<ParamFieldInfo, 27> a{};
        for (std::size_t i = 0; i < 27; ++i) a[i] = field_defs()[i].info;
        return a;
    }();
    return infos;
}

std::size_t param_index(const std::string& name) {
    const auto& defs = field_defs();
    for (std::size_t i = 0; i < defs.size(); ++i)
        if (name == defs[i].info.name) return i;
    return static_cast<std::size_t>(-1);
}

double& ParamVector::operator[](std::size_t i) { return this->*(field_defs()[i].member); }
double ParamVector::operator[](std::size_t i) const { return this->*(field_defs()[i].member); }

std::array<double, 27> ParamVector::to_array() const {
    std::array<double, 27> a{};
    for (std::size_t i = 0; i < 27; ++i) a[i] = (*this)[i];
    return a;
}

ParamVector ParamVector::from_array(const std::array<double, 27>& a) {
    ParamVector p;
    for (std::size_t i = 0; i < 27; ++i) p[i] = a[i];
    return p;
}

void ParamVector::validate() const {
    const auto& defs = field_defs();
    for (std::size_t i = 0; i < defs.size(); ++i) {
        const double v = (*this)[i];
        const auto& info = defs[i].info;
        if (!(v >= info.lo && v <= info.hi) || !std::isfinite(v))
            throw OutOfRangeParam(info.name, v, info.lo, info.hi);
    }
}

NormalizedParams normalize(const ParamVector& p) {
    NormalizedParams n;
    const auto& defs = field_defs();
    for (std::size_t i = 0; i < defs.size(); ++i) {
        const auto& info = defs[i].info;
        n[i] = 2.0 * (p[i] - info.lo) / (info.hi - info.lo) - 1.0;
    }
    return n;
}

ParamVector denormalize(const NormalizedParams& n) {
    ParamVector p;
    const auto& defs = field_defs();
    for (std::size_t i = 0; i < defs.size(); ++i) {
        const auto& info = defs[i].info;
        const double v = info.lo + (n[i] + 1.0) * 0.5 * (info.hi - info.lo);
        // floating point can land a hair outside the range at the edges
        p[i] = std::min(std::max(v, info.lo), info.hi);
    }
    return p;
}

NormalizedParams clamp_normalized(NormalizedParams n) {
    for (auto& v : n.values) v = std::min(std::max(v, -1.0), 1.0);
    return n;
}

std::string params_to_text(const ParamVector& p) {
    std::ostringstream os;
    const auto& defs = field_defs();
    for (std::size_t i = 0; i < defs.size(); ++i)
        os << defs[i].info.name << " = " << format_double(p[i]) << "\n";
    return os.str();
}

ParamVector params_from_text(const std::string& text) {
    ParamVector p;
    std::array<bool, 27> seen{};
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                throw FormatError("parameter file line " + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        const std::size_t idx = param_index(key);
        if (idx == static_cast<std::size_t>(-1))
            throw FormatError("unknown parameter '" + key + "'");
        try {
            p[idx] = std::stod(val);
        } catch (const std::exception&) {
            throw FormatError("parameter '" + key + "': bad number '" + val + "'");
        }
        seen[idx] = true;
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i]) throw FormatError(std::string("missing parameter '") + param_fields()[i].name + "'");
    return p;
}

std::string params_to_json(const ParamVector& p) {
    nlohmann::ordered_json j;
    const auto& defs = field_defs();
    for (std::size_t i = 0; i < defs.size(); ++i) j[defs[i].info.name] = p[i];
    return j.dump(2);
}

ParamVector params_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const std::exception& e) {
        throw FormatError(std::string("bad parameter json: ") + e.what());
    }
    ParamVector p;
    const auto& defs = field_defs();
    for (std::size_t i = 0; i < defs.size(); ++i) {
        const char* name = defs[i].info.name;
        if (!j.contains(name)) throw FormatError(std::string("missing parameter '") + name + "'");
        p[i] = j.at(name).get<double>();
    }
    return p;
}

}  // namespace pipematch
