#include "adlearn/datagen.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "adlearn/errors.hpp"

namespace adl {

double NormalStream::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1;
    do {
        u1 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    } while (u1 <= 0.0);
    const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

ArProcessConfig ArProcessConfig::from_case(const SystemCase& sc, double cv, double phi1, std::uint64_t seed) {
    ArProcessConfig c;
    const Eigen::VectorXd mu = sc.bus_demand();
    std::vector<double> p0, p1, s;
    for (Index b = 0; b < sc.num_buses(); ++b) {
        if (!(mu(b) > 0)) continue;
        c.bus_ids.push_back(sc.buses[static_cast<std::size_t>(b)].id);
        p0.push_back(mu(b) * (1.0 - phi1));
        p1.push_back(phi1);
        s.push_back(cv * mu(b) * std::sqrt(1.0 - phi1 * phi1));
    }
    const auto n = static_cast<Index>(p0.size());
    c.phi0 = Eigen::Map<Eigen::VectorXd>(p0.data(), n);
    c.phi1 = Eigen::Map<Eigen::VectorXd>(p1.data(), n);
    c.sigma = Eigen::Map<Eigen::VectorXd>(s.data(), n);
    c.seed = seed;
    return c;
}

void ArProcessConfig::validate() const {
    const Index n = num_buses();
    if (n == 0) throw InvariantError("AR process has no buses");
    if (phi0.size() != n || phi1.size() != n || sigma.size() != n)
        throw DimensionError("AR coefficient vectors must have one entry per bus");
    if ((phi1.array().abs() >= 1.0).any()) throw InvariantError("AR process requires |phi1| < 1");
    if (!(sigma.array() >= 0.0).all()) throw InvariantError("AR noise std must be >= 0");
    if (burn_in < 0) throw InvariantError("burn-in must be >= 0");
    if (exogenous) {
        if (std::abs(exogenous->psi1) >= 1.0) throw InvariantError("exogenous process requires |psi1| < 1");
        if (!(exogenous->sigma_e >= 0.0)) throw InvariantError("exogenous noise std must be >= 0");
    }
}

nlohmann::json ArProcessConfig::to_json() const {
    nlohmann::json j;
    j["bus_ids"] = bus_ids;
    j["phi0"] = std::vector<double>(phi0.data(), phi0.data() + phi0.size());
    j["phi1"] = std::vector<double>(phi1.data(), phi1.data() + phi1.size());
    j["sigma"] = std::vector<double>(sigma.data(), sigma.data() + sigma.size());
    j["seed"] = seed;
    j["burn_in"] = burn_in;
    j["truncate"] = truncate;
    if (exogenous)
        j["exogenous"] = {{"psi0", exogenous->psi0}, {"psi1", exogenous->psi1}, {"sigma_e", exogenous->sigma_e}};
    return j;
}

std::optional<Index> Dataset::find_feature(const std::string& name) const {
    for (std::size_t i = 0; i < feature_names.size(); ++i)
        if (feature_names[i] == name) return static_cast<Index>(i);
    return std::nullopt;
}

Index Dataset::feature_index(const std::string& name) const {
    if (auto i = find_feature(name)) return *i;
    throw DimensionError("dataset has no feature '" + name + "'");
}

Dataset Dataset::slice(Index begin, Index n) const {
    if (begin < 0 || n < 0 || begin + n > length()) throw DimensionError("dataset slice out of range");
    Dataset d = *this;
    d.demand = demand.middleRows(begin, n);
    d.features = features.middleRows(begin, n);
    return d;
}

void Dataset::validate() const {
    if (length() < 2) throw InvariantError("dataset needs at least 2 rows");
    if (static_cast<Index>(bus_ids.size()) != demand.cols()) throw DimensionError("bus id count does not match demand columns");
    if (static_cast<Index>(feature_names.size()) != features.cols())
        throw DimensionError("feature name count does not match feature columns");
    if (features.rows() != demand.rows()) throw DimensionError("feature rows do not align with demand rows");
    if (!demand.allFinite() || !features.allFinite()) throw InvariantError("dataset has non-finite values");
    if ((demand.array() < 0.0).any()) throw InvariantError("dataset has negative demand");
}

bool Dataset::operator==(const Dataset& o) const {
    return bus_ids == o.bus_ids && feature_names == o.feature_names && demand.rows() == o.demand.rows() &&
           demand.cols() == o.demand.cols() && features.rows() == o.features.rows() &&
           features.cols() == o.features.cols() && demand == o.demand && features == o.features;
}

Dataset generate(const ArProcessConfig& config, Index T) {
    config.validate();
    if (T < 2) throw InvariantError("dataset length T must be >= 2");
    const Index nb = config.num_buses();
    NormalStream rng(config.seed);

    Eigen::VectorXd d = config.phi0.array() / (1.0 - config.phi1.array());
    double e = 0.0;
    if (config.exogenous) e = config.exogenous->psi0 / (1.0 - config.exogenous->psi1);

    auto step = [&]() {
        if (config.exogenous) {
            const auto& x = *config.exogenous;
            e = x.psi0 + x.psi1 * e + x.sigma_e * rng.next();
        }
        for (Index b = 0; b < nb; ++b) {
            const double sd = config.exogenous ? std::max(e, 0.0) : config.sigma(b);
            double v = config.phi0(b) + config.phi1(b) * d(b) + sd * rng.next();
            if (config.truncate) v = std::max(v, 0.0);
            d(b) = v;
        }
    };
    for (int k = 0; k < config.burn_in; ++k) step();

    Dataset ds;
    ds.bus_ids = config.bus_ids;
    for (int id : config.bus_ids) ds.feature_names.push_back("lag1_" + std::to_string(id));
    if (config.exogenous) ds.feature_names.push_back("E");
    ds.demand.resize(T, nb);
    ds.features.resize(T, static_cast<Index>(ds.feature_names.size()));
    for (Index t = 0; t < T; ++t) {
        ds.features.row(t).head(nb) = d.transpose();
        step();
        ds.demand.row(t) = d.transpose();
        if (config.exogenous) ds.features(t, nb) = e;
    }
    ds.provenance = config.to_json();
    ds.provenance["T"] = T;
    return ds;
}

std::string manifest_path(const std::string& csv_path) {
    const auto dot = csv_path.rfind('.');
    const auto slash = csv_path.find_last_of('/');
    const std::string stem =
        (dot != std::string::npos && (slash == std::string::npos || dot > slash)) ? csv_path.substr(0, dot) : csv_path;
    return stem + ".manifest.json";
}

void save_dataset(const Dataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << 't';
    for (int id : ds.bus_ids) f << ",bus_" << id;
    for (const auto& n : ds.feature_names) f << ",feat_" << n;
    f << '\n';
    char buf[40];
    for (Index t = 0; t < ds.length(); ++t) {
        f << t;
        for (Index b = 0; b < ds.num_buses(); ++b) {
            std::snprintf(buf, sizeof buf, ",%.17g", ds.demand(t, b));
            f << buf;
        }
        for (Index k = 0; k < ds.features.cols(); ++k) {
            std::snprintf(buf, sizeof buf, ",%.17g", ds.features(t, k));
            f << buf;
        }
        f << '\n';
    }
    if (!f) throw IoError("write failed: " + path);
    nlohmann::json m = ds.provenance;
    m["T"] = ds.length();
    m["columns"] = {{"bus_ids", ds.bus_ids}, {"features", ds.feature_names}};
    std::ofstream mf(manifest_path(path));
    if (!mf) throw IoError("cannot write " + manifest_path(path));
    mf << m.dump(2) << '\n';
}

Dataset load_dataset(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open dataset " + path);
    std::string line;
    if (!std::getline(f, line)) throw SchemaError(path + ": empty file");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) header.push_back(c);
    }
    if (header.empty() || header[0] != "t") throw SchemaError(path + ": header must start with 't'");
    Dataset ds;
    for (std::size_t k = 1; k < header.size(); ++k) {
        const auto& h = header[k];
        if (h.rfind("bus_", 0) == 0) {
            if (!ds.feature_names.empty()) throw SchemaError(path + ": bus column after feature columns");
            try {
                ds.bus_ids.push_back(std::stoi(h.substr(4)));
            } catch (const std::exception&) {
                throw SchemaError(path + ": bad bus column '" + h + "'");
            }
        } else if (h.rfind("feat_", 0) == 0) {
            ds.feature_names.push_back(h.substr(5));
        } else {
            throw SchemaError(path + ": unknown column '" + h + "'");
        }
    }
    const auto nb = ds.bus_ids.size();
    const auto nf = ds.feature_names.size();
    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::vector<double> vals;
        for (std::string c; std::getline(ss, c, ',');) {
            try {
                std::size_t pos = 0;
                vals.push_back(std::stod(c, &pos));
                if (pos != c.size()) throw std::invalid_argument(c);
            } catch (const std::exception&) {
                throw SchemaError(path + ":" + std::to_string(lineno) + ": bad number '" + c + "'");
            }
        }
        if (vals.size() != 1 + nb + nf)
            throw SchemaError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(1 + nb + nf) +
                              " fields, got " + std::to_string(vals.size()));
        rows.push_back(std::move(vals));
    }
    const auto T = static_cast<Index>(rows.size());
    ds.demand.resize(T, static_cast<Index>(nb));
    ds.features.resize(T, static_cast<Index>(nf));
    for (Index t = 0; t < T; ++t) {
        const auto& r = rows[static_cast<std::size_t>(t)];
        for (std::size_t b = 0; b < nb; ++b) ds.demand(t, static_cast<Index>(b)) = r[1 + b];
        for (std::size_t k = 0; k < nf; ++k) ds.features(t, static_cast<Index>(k)) = r[1 + nb + k];
    }
    std::ifstream mf(manifest_path(path));
    if (mf) {
        try {
            ds.provenance = nlohmann::json::parse(mf);
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(manifest_path(path) + ": " + e.what());
        }
        if (ds.provenance.contains("T") && ds.provenance["T"].get<Index>() != T)
            throw SchemaError(path + ": manifest lists T=" + std::to_string(ds.provenance["T"].get<Index>()) +
                              " but file has " + std::to_string(T) + " rows");
        ds.provenance.erase("columns");
    }
    ds.validate();
    return ds;
}

}  // namespace adl
