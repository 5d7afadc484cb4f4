#include "chainopt/io.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace chainopt::io {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where)
{
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* key : allowed)
            known |= it.key() == key;
        if (!known)
            throw std::invalid_argument("unknown key \"" + it.key() + "\" in " + where);
    }
}

double require_number(const json& obj, const char* key, const std::string& where)
{
    if (!obj.contains(key))
        throw std::invalid_argument("missing key \"" + std::string(key) + "\" in " + where);
    if (!obj[key].is_number())
        throw std::invalid_argument("key \"" + std::string(key) + "\" in " + where
                                    + " must be a number");
    return obj[key].get<double>();
}

std::string format_number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

ChainSpec parse_chain_config(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object())
        throw std::invalid_argument("config root must be an object");
    reject_unknown_keys(doc, {"input_rate", "e2e_deadline", "functions"}, "config");

    ChainSpec spec;
    spec.input_rate = require_number(doc, "input_rate", "config");
    spec.e2e_deadline = require_number(doc, "e2e_deadline", "config");
    if (!doc.contains("functions") || !doc["functions"].is_array())
        throw std::invalid_argument("config must contain a \"functions\" array");
    std::size_t i = 0;
    for (const json& fj : doc["functions"]) {
        const std::string where = "functions[" + std::to_string(i) + "]";
        if (!fj.is_object())
            throw std::invalid_argument(where + " must be an object");
        reject_unknown_keys(fj, {"nominal_speed", "compute_cost", "queue_cost", "switch_delay"},
                            where);
        FunctionSpec f;
        f.nominal_speed = require_number(fj, "nominal_speed", where);
        f.compute_cost_rate = require_number(fj, "compute_cost", where);
        f.queue_cost_rate = require_number(fj, "queue_cost", where);
        f.switch_delay = require_number(fj, "switch_delay", where);
        spec.functions.push_back(f);
        ++i;
    }
    validate(spec);
    return spec;
}

ChainSpec load_chain_config(const std::string& path)
{
    return parse_chain_config(read_file(path));
}

namespace {

json chain_to_json(const ChainSpec& spec)
{
    json functions = json::array();
    for (const FunctionSpec& f : spec.functions)
        functions.push_back({{"nominal_speed", f.nominal_speed},
                             {"compute_cost", f.compute_cost_rate},
                             {"queue_cost", f.queue_cost_rate},
                             {"switch_delay", f.switch_delay}});
    return {{"input_rate", spec.input_rate},
            {"e2e_deadline", spec.e2e_deadline},
            {"functions", functions}};
}

json cost_to_json(const CostBreakdown& c)
{
    return {{"compute", c.compute_cost},
            {"queue", c.queue_cost},
            {"lower_bound", c.lower_bound},
            {"total", c.total}};
}

CostBreakdown cost_from_json(const json& j)
{
    CostBreakdown c;
    c.compute_cost = j.at("compute").get<double>();
    c.queue_cost = j.at("queue").get<double>();
    c.lower_bound = j.at("lower_bound").get<double>();
    c.total = j.at("total").get<double>();
    return c;
}

} // namespace

std::string emit_plan(const ChainSpec& spec, const SwitchingPlan& plan,
                      const std::string& input_hash)
{
    json functions = json::array();
    for (const FunctionSchedule& f : plan.functions)
        functions.push_back({{"period", f.period},
                             {"on_duration", f.on_duration},
                             {"onset", f.onset},
                             {"always_on", f.always_on},
                             {"base_machines", f.base_machines},
                             {"nominal_speed", f.nominal_speed},
                             {"residual_rate", f.residual_rate},
                             {"qmax", f.qmax},
                             {"sim_bound", f.sim_bound}});
    json doc = {{"method", to_string(plan.method)},
                {"tool_version", kToolVersion},
                {"input_hash", input_hash},
                {"chain", chain_to_json(spec)},
                {"e2e_bound", plan.e2e_bound},
                {"cost", cost_to_json(plan.cost)},
                {"functions", functions}};
    return doc.dump(2) + "\n";
}

PlanFile parse_plan(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("plan is not valid JSON: ") + e.what());
    }
    PlanFile pf;
    const std::string method = doc.at("method").get<std::string>();
    if (method == "linear")
        pf.plan.method = PlanMethod::linear;
    else if (method == "common-period")
        pf.plan.method = PlanMethod::common_period;
    else
        throw std::invalid_argument("unknown plan method \"" + method + "\"");
    pf.version = doc.at("tool_version").get<std::string>();
    pf.input_hash = doc.at("input_hash").get<std::string>();
    pf.chain = parse_chain_config(doc.at("chain").dump());
    pf.plan.e2e_bound = doc.at("e2e_bound").get<double>();
    pf.plan.cost = cost_from_json(doc.at("cost"));
    for (const json& fj : doc.at("functions")) {
        FunctionSchedule f;
        f.period = fj.at("period").get<double>();
        f.on_duration = fj.at("on_duration").get<double>();
        f.onset = fj.at("onset").get<double>();
        f.always_on = fj.at("always_on").get<bool>();
        f.base_machines = fj.at("base_machines").get<int>();
        f.nominal_speed = fj.at("nominal_speed").get<double>();
        f.residual_rate = fj.at("residual_rate").get<double>();
        f.qmax = fj.at("qmax").get<double>();
        f.sim_bound = fj.at("sim_bound").get<double>();
        pf.plan.functions.push_back(f);
    }
    if (pf.plan.functions.size() != pf.chain.size())
        throw std::invalid_argument("plan and embedded chain disagree on the function count");
    return pf;
}

PlanFile load_plan(const std::string& path)
{
    return parse_plan(read_file(path));
}

namespace {

std::size_t segment_index(const SimulationTrace& tr, double t)
{
    auto it = std::upper_bound(tr.times.begin(), tr.times.end(), t);
    if (it == tr.times.begin())
        return 0;
    return static_cast<std::size_t>(it - tr.times.begin()) - 1;
}

double lerp_at(const SimulationTrace& tr, const std::vector<double>& values, double t)
{
    const std::size_t k = segment_index(tr, t);
    if (k + 1 >= tr.times.size())
        return values.back();
    const double t0 = tr.times[k], t1 = tr.times[k + 1];
    if (t1 <= t0)
        return values[k + 1];
    const double w = (t - t0) / (t1 - t0);
    return values[k] * (1.0 - w) + values[k + 1] * w;
}

void csv_row(std::string& out, const SimulationTrace& tr, double t, std::size_t seg,
             const std::vector<double>& queues, const std::vector<double>& served_last)
{
    const std::size_t n = tr.queue.size();
    out += format_number(t);
    for (std::size_t i = 0; i < n; ++i) {
        out += ',';
        out += format_number(queues[i]);
        out += ',';
        out += std::to_string(tr.machines[i][seg]);
        out += ',';
        out += format_number(tr.service[i][seg]);
    }
    out += ',';
    out += format_number(t - served_last[n - 1] / tr.input_rate);
    out += '\n';
}

} // namespace

std::string trace_csv(const SimulationTrace& trace, double dt)
{
    const std::size_t n = trace.queue.size();
    std::string out = "time";
    for (std::size_t i = 0; i < n; ++i) {
        const std::string idx = std::to_string(i + 1);
        for (const char* col : {",queue", ",machines", ",service"}) {
            out += col;
            out += idx;
        }
    }
    out += ",e2e_delay\n";

    std::vector<double> q(n), s(n);
    if (dt <= 0.0) {
        for (std::size_t k = 0; k < trace.times.size(); ++k) {
            for (std::size_t i = 0; i < n; ++i) {
                q[i] = trace.queue[i][k];
                s[i] = trace.served_cum[i][k];
            }
            csv_row(out, trace, trace.times[k], k, q, s);
        }
    } else {
        for (long step = 0;; ++step) {
            const double t = step * dt;
            if (t > trace.horizon + 1e-12 * trace.horizon)
                break;
            const double tc = std::min(t, trace.horizon);
            const std::size_t seg = segment_index(trace, tc);
            for (std::size_t i = 0; i < n; ++i) {
                q[i] = lerp_at(trace, trace.queue[i], tc);
                s[i] = lerp_at(trace, trace.served_cum[i], tc);
            }
            csv_row(out, trace, tc, seg, q, s);
        }
    }
    return out;
}

std::string fnv1a_hex(const std::string& bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << text;
}

} // namespace chainopt::io
