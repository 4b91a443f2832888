#include "adlearn/netcase.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <set>

#include "adlearn/errors.hpp"

namespace adl {

namespace {

bool same(const std::optional<Eigen::VectorXd>& a, const std::optional<Eigen::VectorXd>& b) {
    if (a.has_value() != b.has_value()) return false;
    if (!a) return true;
    return a->size() == b->size() && *a == *b;
}

template <typename F>
Eigen::VectorXd gather(const std::vector<Generator>& gens, F f) {
    Eigen::VectorXd v(static_cast<Index>(gens.size()));
    for (std::size_t i = 0; i < gens.size(); ++i) v(static_cast<Index>(i)) = f(gens[i]);
    return v;
}

}  // namespace

bool TildeOverrides::operator==(const TildeOverrides& o) const {
    return same(cost, o.cost) && same(p_up, o.p_up) && same(p_dn, o.p_dn) &&
           same(capacity, o.capacity) && same(limit, o.limit) && load_shed == o.load_shed &&
           spill == o.spill;
}

std::optional<Index> SystemCase::find_bus(int id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].id == id) return static_cast<Index>(i);
    return std::nullopt;
}

std::optional<Index> SystemCase::find_zone(int id) const {
    for (std::size_t i = 0; i < zones.size(); ++i)
        if (zones[i].id == id) return static_cast<Index>(i);
    return std::nullopt;
}

Index SystemCase::bus_index(int id) const {
    if (auto i = find_bus(id)) return *i;
    throw InvariantError("unknown bus id " + std::to_string(id));
}

Index SystemCase::zone_index(int id) const {
    if (auto i = find_zone(id)) return *i;
    throw InvariantError("unknown zone id " + std::to_string(id));
}

Eigen::VectorXd SystemCase::capacity() const { return gather(generators, [](const Generator& g) { return g.capacity; }); }
Eigen::VectorXd SystemCase::cost() const { return gather(generators, [](const Generator& g) { return g.cost; }); }
Eigen::VectorXd SystemCase::rbar_up() const { return gather(generators, [](const Generator& g) { return g.rbar_up; }); }
Eigen::VectorXd SystemCase::rbar_dn() const { return gather(generators, [](const Generator& g) { return g.rbar_dn; }); }
Eigen::VectorXd SystemCase::p_up() const { return gather(generators, [](const Generator& g) { return g.p_up; }); }
Eigen::VectorXd SystemCase::p_dn() const { return gather(generators, [](const Generator& g) { return g.p_dn; }); }

Eigen::VectorXd SystemCase::limit() const {
    Eigen::VectorXd v(num_lines());
    for (std::size_t i = 0; i < lines.size(); ++i) v(static_cast<Index>(i)) = lines[i].limit;
    return v;
}

Eigen::VectorXd SystemCase::tilde_capacity() const { return tilde.capacity.value_or(capacity()); }
Eigen::VectorXd SystemCase::tilde_cost() const { return tilde.cost.value_or(cost()); }
Eigen::VectorXd SystemCase::tilde_p_up() const { return tilde.p_up.value_or(p_up()); }
Eigen::VectorXd SystemCase::tilde_p_dn() const { return tilde.p_dn.value_or(p_dn()); }
Eigen::VectorXd SystemCase::tilde_limit() const { return tilde.limit.value_or(limit()); }

Eigen::VectorXd SystemCase::bus_demand() const {
    Eigen::VectorXd v(num_buses());
    for (std::size_t i = 0; i < buses.size(); ++i) v(static_cast<Index>(i)) = demand_scale * buses[i].demand;
    return v;
}

std::vector<Index> SystemCase::generator_zone_indices() const {
    std::vector<Index> z(generators.size(), -1);
    for (std::size_t i = 0; i < generators.size(); ++i)
        if (generators[i].zone) z[i] = zone_index(*generators[i].zone);
    return z;
}

std::vector<Index> SystemCase::bus_zone_indices() const {
    const auto nb = buses.size();
    std::vector<Index> z(nb, -1);
    for (std::size_t b = 0; b < nb; ++b)
        if (buses[b].zone) z[b] = zone_index(*buses[b].zone);
    for (const auto& g : generators) {
        const auto b = static_cast<std::size_t>(bus_index(g.bus));
        if (z[b] < 0 && g.zone) z[b] = zone_index(*g.zone);
    }
    std::vector<std::vector<std::size_t>> adj(nb);
    for (const auto& l : lines) {
        const auto a = static_cast<std::size_t>(bus_index(l.from));
        const auto b = static_cast<std::size_t>(bus_index(l.to));
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::vector<Index> out = z;
    for (std::size_t b = 0; b < nb; ++b) {
        if (out[b] >= 0) continue;
        std::vector<char> seen(nb, 0);
        std::deque<std::size_t> q{b};
        seen[b] = 1;
        Index found = -1;
        while (!q.empty() && found < 0) {
            const auto u = q.front();
            q.pop_front();
            if (z[u] >= 0) found = z[u];
            std::vector<std::size_t> next = adj[u];
            std::sort(next.begin(), next.end());
            for (auto v : next)
                if (!seen[v]) {
                    seen[v] = 1;
                    q.push_back(v);
                }
        }
        out[b] = found >= 0 ? found : (zones.empty() ? -1 : 0);
    }
    return out;
}

void SystemCase::validate(PenaltyRule rule) const {
    if (buses.empty()) throw InvariantError("case has no buses");
    std::set<int> ids;
    for (const auto& b : buses) {
        if (!ids.insert(b.id).second) throw InvariantError("duplicate bus id " + std::to_string(b.id));
        if (b.demand < 0) throw InvariantError("bus " + std::to_string(b.id) + " has negative demand");
        if (b.zone && !find_zone(*b.zone))
            throw InvariantError("bus " + std::to_string(b.id) + " references unknown zone " + std::to_string(*b.zone));
    }
    std::set<int> zids;
    for (const auto& z : zones)
        if (!zids.insert(z.id).second) throw InvariantError("duplicate zone id " + std::to_string(z.id));
    std::set<int> gids;
    double max_cost = 0.0;
    for (const auto& g : generators) {
        const std::string who = "generator " + std::to_string(g.id);
        if (!gids.insert(g.id).second) throw InvariantError("duplicate " + who);
        if (!find_bus(g.bus)) throw InvariantError(who + " references unknown bus " + std::to_string(g.bus));
        if (g.zone && !find_zone(*g.zone)) throw InvariantError(who + " references unknown zone " + std::to_string(*g.zone));
        for (double v : {g.capacity, g.cost, g.rbar_up, g.rbar_dn, g.p_up, g.p_dn})
            if (!(v >= 0) || !std::isfinite(v)) throw InvariantError(who + " has a negative or non-finite parameter");
        max_cost = std::max(max_cost, g.cost);
    }
    std::set<int> lids;
    for (const auto& l : lines) {
        const std::string who = "line " + std::to_string(l.id);
        if (!lids.insert(l.id).second) throw InvariantError("duplicate " + who);
        if (l.from == l.to) throw InvariantError(who + " connects a bus to itself");
        if (!find_bus(l.from) || !find_bus(l.to)) throw InvariantError(who + " references an unknown bus");
        if (!(l.reactance > 0)) throw InvariantError(who + " has non-positive reactance");
        if (!(l.limit >= 0)) throw InvariantError(who + " has a negative limit");
    }
    const double ls = penalties.load_shed;
    const double sp = penalties.spill;
    if (!(sp >= 0)) throw InvariantError("spill penalty must be >= 0");
    if (rule == PenaltyRule::Strict) {
        if (!(ls > sp && sp > max_cost))
            throw InvariantError("penalties must satisfy load_shed > spill > max generator cost");
    } else if (!(ls > max_cost)) {
        throw InvariantError("load_shed penalty must exceed the max generator cost");
    }
    auto check_len = [&](const std::optional<Eigen::VectorXd>& v, Index n, const char* what) {
        if (v && v->size() != n)
            throw InvariantError(std::string("tilde.") + what + " has length " + std::to_string(v->size()) +
                                 ", expected " + std::to_string(n));
        if (v && (v->array() < 0).any()) throw InvariantError(std::string("tilde.") + what + " has negative entries");
    };
    check_len(tilde.cost, num_generators(), "cost");
    check_len(tilde.p_up, num_generators(), "p_up");
    check_len(tilde.p_dn, num_generators(), "p_dn");
    check_len(tilde.capacity, num_generators(), "capacity");
    check_len(tilde.limit, num_lines(), "limit");
    if (!(demand_scale > 0)) throw InvariantError("demand_scale must be > 0");
}

IncidenceMaps incidence_maps(const SystemCase& sc) {
    IncidenceMaps m;
    m.M = Eigen::MatrixXd::Zero(sc.num_buses(), sc.num_generators());
    m.N = Eigen::MatrixXd::Zero(sc.num_zones(), sc.num_generators());
    const auto gz = sc.generator_zone_indices();
    for (Index g = 0; g < sc.num_generators(); ++g) {
        m.M(sc.bus_index(sc.generators[static_cast<std::size_t>(g)].bus), g) = 1.0;
        if (gz[static_cast<std::size_t>(g)] >= 0) m.N(gz[static_cast<std::size_t>(g)], g) = 1.0;
    }
    return m;
}

PtdfMatrix compute_ptdf(const SystemCase& sc, std::optional<int> slack) {
    const Index nb = sc.num_buses();
    const Index nl = sc.num_lines();
    PtdfMatrix out;
    out.slack = slack.value_or(std::min_element(sc.buses.begin(), sc.buses.end(),
                                                [](const Bus& a, const Bus& b) { return a.id < b.id; })->id);
    const Index s = sc.bus_index(out.slack);
    out.B = Eigen::MatrixXd::Zero(nl, nb);
    if (nb == 1) return out;

    // connectivity
    std::vector<std::vector<Index>> adj(static_cast<std::size_t>(nb));
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nl, nb);
    Eigen::VectorXd y(nl);
    for (Index l = 0; l < nl; ++l) {
        const auto& ln = sc.lines[static_cast<std::size_t>(l)];
        const Index a = sc.bus_index(ln.from);
        const Index b = sc.bus_index(ln.to);
        A(l, a) = 1.0;
        A(l, b) = -1.0;
        y(l) = 1.0 / ln.reactance;
        adj[static_cast<std::size_t>(a)].push_back(b);
        adj[static_cast<std::size_t>(b)].push_back(a);
    }
    std::vector<char> seen(static_cast<std::size_t>(nb), 0);
    std::deque<Index> q{s};
    seen[static_cast<std::size_t>(s)] = 1;
    Index reached = 1;
    while (!q.empty()) {
        const Index u = q.front();
        q.pop_front();
        for (Index v : adj[static_cast<std::size_t>(u)])
            if (!seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(v)] = 1;
                ++reached;
                q.push_back(v);
            }
    }
    if (reached != nb)
        throw NetworkError("network is disconnected: " + std::to_string(nb - reached) +
                           " buses unreachable from slack " + std::to_string(out.slack));

    std::vector<Index> keep;
    for (Index b = 0; b < nb; ++b)
        if (b != s) keep.push_back(b);
    Eigen::MatrixXd Ar(nl, nb - 1);
    for (Index k = 0; k < nb - 1; ++k) Ar.col(k) = A.col(keep[static_cast<std::size_t>(k)]);
    const Eigen::MatrixXd L = Ar.transpose() * y.asDiagonal() * Ar;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(L);
    if (!lu.isInvertible()) throw NetworkError("reduced Laplacian is singular");
    const Eigen::MatrixXd Br = y.asDiagonal() * Ar * lu.inverse();
    for (Index k = 0; k < nb - 1; ++k) out.B.col(keep[static_cast<std::size_t>(k)]) = Br.col(k);
    return out;
}

// ---------------------------------------------------------------- JSON

namespace {

using nlohmann::json;

const json& require(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object()) throw SchemaError(path + ": expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw SchemaError(path + "." + key + ": missing");
    return *it;
}

double num(const json& j, const std::string& path) {
    if (!j.is_number()) throw SchemaError(path + ": expected a number");
    return j.get<double>();
}

int integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) throw SchemaError(path + ": expected an integer");
    return j.get<int>();
}

const json& array(const json& j, const std::string& path) {
    if (!j.is_array()) throw SchemaError(path + ": expected an array");
    return j;
}

std::optional<Eigen::VectorXd> opt_vec(const json& j, const std::string& key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end()) return std::nullopt;
    const auto& a = array(*it, path + "." + key);
    Eigen::VectorXd v(static_cast<Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        v(static_cast<Index>(i)) = num(a[i], path + "." + key + "[" + std::to_string(i) + "]");
    return v;
}

json vec_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

}  // namespace

SystemCase case_from_json(const json& j) {
    SystemCase sc;
    if (!j.is_object()) throw SchemaError("$: expected an object");
    if (auto it = j.find("name"); it != j.end() && it->is_string()) sc.name = it->get<std::string>();
    const auto& buses = array(require(j, "buses", "$"), "$.buses");
    for (std::size_t i = 0; i < buses.size(); ++i) {
        const std::string p = "$.buses[" + std::to_string(i) + "]";
        Bus b;
        b.id = integer(require(buses[i], "id", p), p + ".id");
        if (auto it = buses[i].find("name"); it != buses[i].end()) b.name = it->get<std::string>();
        if (auto it = buses[i].find("demand"); it != buses[i].end()) b.demand = num(*it, p + ".demand");
        if (auto it = buses[i].find("zone"); it != buses[i].end()) b.zone = integer(*it, p + ".zone");
        sc.buses.push_back(b);
    }
    const auto& gens = array(require(j, "generators", "$"), "$.generators");
    for (std::size_t i = 0; i < gens.size(); ++i) {
        const std::string p = "$.generators[" + std::to_string(i) + "]";
        const auto& gj = gens[i];
        Generator g;
        g.id = integer(require(gj, "id", p), p + ".id");
        g.bus = integer(require(gj, "bus", p), p + ".bus");
        g.capacity = num(require(gj, "capacity", p), p + ".capacity");
        g.cost = num(require(gj, "cost", p), p + ".cost");
        auto opt = [&](const char* k, double def) {
            auto it = gj.find(k);
            return it == gj.end() ? def : num(*it, p + "." + k);
        };
        g.rbar_up = opt("rbar_up", g.capacity);
        g.rbar_dn = opt("rbar_dn", g.capacity);
        g.p_up = opt("p_up", g.cost);
        g.p_dn = opt("p_dn", g.cost);
        if (auto it = gj.find("zone"); it != gj.end() && !it->is_null()) g.zone = integer(*it, p + ".zone");
        sc.generators.push_back(g);
    }
    if (auto it = j.find("lines"); it != j.end()) {
        const auto& lines = array(*it, "$.lines");
        for (std::size_t i = 0; i < lines.size(); ++i) {
            const std::string p = "$.lines[" + std::to_string(i) + "]";
            Line l;
            l.id = integer(require(lines[i], "id", p), p + ".id");
            l.from = integer(require(lines[i], "from", p), p + ".from");
            l.to = integer(require(lines[i], "to", p), p + ".to");
            l.reactance = num(require(lines[i], "reactance", p), p + ".reactance");
            l.limit = num(require(lines[i], "limit", p), p + ".limit");
            sc.lines.push_back(l);
        }
    }
    const auto& zones = array(require(j, "zones", "$"), "$.zones");
    for (std::size_t i = 0; i < zones.size(); ++i) {
        const std::string p = "$.zones[" + std::to_string(i) + "]";
        Zone z;
        z.id = integer(require(zones[i], "id", p), p + ".id");
        if (auto it = zones[i].find("name"); it != zones[i].end()) z.name = it->get<std::string>();
        sc.zones.push_back(z);
    }
    const auto& pen = require(j, "penalties", "$");
    sc.penalties.load_shed = num(require(pen, "load_shed", "$.penalties"), "$.penalties.load_shed");
    sc.penalties.spill = num(require(pen, "spill", "$.penalties"), "$.penalties.spill");
    if (auto it = j.find("tilde"); it != j.end()) {
        const auto& t = *it;
        if (!t.is_object()) throw SchemaError("$.tilde: expected an object");
        sc.tilde.cost = opt_vec(t, "cost", "$.tilde");
        sc.tilde.p_up = opt_vec(t, "p_up", "$.tilde");
        sc.tilde.p_dn = opt_vec(t, "p_dn", "$.tilde");
        sc.tilde.capacity = opt_vec(t, "capacity", "$.tilde");
        sc.tilde.limit = opt_vec(t, "limit", "$.tilde");
        if (auto ls = t.find("load_shed"); ls != t.end()) sc.tilde.load_shed = num(*ls, "$.tilde.load_shed");
        if (auto sp = t.find("spill"); sp != t.end()) sc.tilde.spill = num(*sp, "$.tilde.spill");
    }
    if (auto it = j.find("demand_scale"); it != j.end()) sc.demand_scale = num(*it, "$.demand_scale");
    sc.validate(PenaltyRule::Strict);
    return sc;
}

json case_to_json(const SystemCase& sc) {
    json j;
    j["name"] = sc.name;
    j["buses"] = json::array();
    for (const auto& b : sc.buses) {
        json bj{{"id", b.id}, {"demand", b.demand}};
        if (!b.name.empty()) bj["name"] = b.name;
        if (b.zone) bj["zone"] = *b.zone;
        j["buses"].push_back(bj);
    }
    j["generators"] = json::array();
    for (const auto& g : sc.generators) {
        json gj{{"id", g.id},         {"bus", g.bus},         {"capacity", g.capacity}, {"cost", g.cost},
                {"rbar_up", g.rbar_up}, {"rbar_dn", g.rbar_dn}, {"p_up", g.p_up},         {"p_dn", g.p_dn}};
        if (g.zone) gj["zone"] = *g.zone;
        j["generators"].push_back(gj);
    }
    j["lines"] = json::array();
    for (const auto& l : sc.lines)
        j["lines"].push_back(
            {{"id", l.id}, {"from", l.from}, {"to", l.to}, {"reactance", l.reactance}, {"limit", l.limit}});
    j["zones"] = json::array();
    for (const auto& z : sc.zones) {
        json zj{{"id", z.id}};
        if (!z.name.empty()) zj["name"] = z.name;
        j["zones"].push_back(zj);
    }
    j["penalties"] = {{"load_shed", sc.penalties.load_shed}, {"spill", sc.penalties.spill}};
    json t = json::object();
    if (sc.tilde.cost) t["cost"] = vec_json(*sc.tilde.cost);
    if (sc.tilde.p_up) t["p_up"] = vec_json(*sc.tilde.p_up);
    if (sc.tilde.p_dn) t["p_dn"] = vec_json(*sc.tilde.p_dn);
    if (sc.tilde.capacity) t["capacity"] = vec_json(*sc.tilde.capacity);
    if (sc.tilde.limit) t["limit"] = vec_json(*sc.tilde.limit);
    if (sc.tilde.load_shed) t["load_shed"] = *sc.tilde.load_shed;
    if (sc.tilde.spill) t["spill"] = *sc.tilde.spill;
    if (!t.empty()) j["tilde"] = t;
    if (sc.demand_scale != 1.0) j["demand_scale"] = sc.demand_scale;
    return j;
}

SystemCase parse_case(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open case file " + path);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::parse_error& e) {
        throw SchemaError(path + ": " + e.what());
    }
    try {
        return case_from_json(j);
    } catch (const json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
}

void save_case(const SystemCase& sc, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << case_to_json(sc).dump(2) << '\n';
}

SystemCase apply_case_transforms(SystemCase sc, double flow_factor, double demand_factor,
                                  double reserve_cap_frac, double reserve_price_frac) {
    for (double f : {flow_factor, demand_factor, reserve_cap_frac, reserve_price_frac})
        if (!(f > 0.0 && f <= 10.0)) throw InvariantError("transform factors must lie in (0, 10]");
    for (auto& l : sc.lines) l.limit *= flow_factor;
    if (sc.tilde.limit) *sc.tilde.limit *= flow_factor;
    for (auto& g : sc.generators) {
        g.rbar_up *= reserve_cap_frac;
        g.rbar_dn *= reserve_cap_frac;
        g.p_up *= reserve_price_frac;
        g.p_dn *= reserve_price_frac;
    }
    if (sc.tilde.p_up) *sc.tilde.p_up *= reserve_price_frac;
    if (sc.tilde.p_dn) *sc.tilde.p_dn *= reserve_price_frac;
    sc.demand_scale *= demand_factor;
    return sc;
}

}  // namespace adl
