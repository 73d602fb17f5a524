#include "mclip/instance.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "mclip/rng.hpp"

namespace mclip {

namespace {

bool all_finite(const std::vector<Point>& pts) {
    for (const auto& p : pts) {
        if (!std::isfinite(p[0]) || !std::isfinite(p[1])) return false;
    }
    return true;
}

} // namespace

bool Instance::colocated() const {
    return customers == sites;
}

void Instance::validate() const {
    if (!all_finite(customers)) throw std::invalid_argument("customers: non-finite coordinate");
    if (!all_finite(sites)) throw std::invalid_argument("sites: non-finite coordinate");
    if (!(radius >= 0.0) || !std::isfinite(radius))
        throw std::invalid_argument("radius must be finite and nonnegative");
    if (p <= 0) throw std::invalid_argument("p must be positive");
    if (r < 0) throw std::invalid_argument("r must be nonnegative");
    if (r > p) throw std::invalid_argument("r exceeds p");
    if (p > num_sites()) throw std::invalid_argument("p exceeds number of sites");
    if (neighbor_sets.size() != customers.size())
        throw std::invalid_argument("neighbor_sets size does not match customers");
}

void Instance::rebuild_neighbor_sets() {
    neighbor_sets = build_neighbor_sets(customers, sites, radius);
}

std::vector<std::vector<int>> build_neighbor_sets(const std::vector<Point>& customers,
                                                  const std::vector<Point>& sites,
                                                  double radius) {
    if (!all_finite(customers)) throw std::invalid_argument("customers: non-finite coordinate");
    if (!all_finite(sites)) throw std::invalid_argument("sites: non-finite coordinate");
    if (!(radius >= 0.0) || !std::isfinite(radius))
        throw std::invalid_argument("radius must be finite and nonnegative");

    const double r2 = radius * radius;
    std::vector<std::vector<int>> sets(customers.size());
    for (std::size_t i = 0; i < customers.size(); ++i) {
        for (std::size_t j = 0; j < sites.size(); ++j) {
            const double dx = customers[i][0] - sites[j][0];
            const double dy = customers[i][1] - sites[j][1];
            if (dx * dx + dy * dy <= r2) sets[i].push_back(static_cast<int>(j));
        }
    }
    return sets;
}

void GenSpec::validate() const {
    if (n <= 0) throw std::invalid_argument("n must be positive");
    if (p <= 0) throw std::invalid_argument("p must be positive");
    if (r < 0) throw std::invalid_argument("r must be nonnegative");
    if (r > p) throw std::invalid_argument("r exceeds p");
    if (p > n) throw std::invalid_argument("p exceeds n");
    if (!(radius > 0.0) || !std::isfinite(radius))
        throw std::invalid_argument("radius must be finite and positive");
    if (count <= 0) throw std::invalid_argument("count must be positive");
}

Instance generate_uniform_instance(const GenSpec& spec, int index) {
    spec.validate();
    if (index < 0 || index >= spec.count)
        throw std::invalid_argument("index out of range for spec.count");

    Rng rng = Rng::from_stream(spec.seed, static_cast<std::uint64_t>(index));

    Instance inst;
    inst.customers.reserve(spec.n);
    for (int i = 0; i < spec.n; ++i) {
        const double x = rng.uniform01();
        const double y = rng.uniform01();
        inst.customers.push_back({x, y});
    }
    inst.sites = inst.customers;
    inst.radius = spec.radius;
    inst.p = spec.p;
    inst.r = spec.r;
    inst.rebuild_neighbor_sets();
    inst.validate();
    return inst;
}

namespace {

std::vector<Point> parse_points(const nlohmann::json& arr, const char* field) {
    if (!arr.is_array()) throw std::invalid_argument(std::string(field) + " must be an array");
    std::vector<Point> pts;
    pts.reserve(arr.size());
    for (const auto& e : arr) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
            throw std::invalid_argument(std::string(field) + " entries must be [x, y] pairs");
        pts.push_back({e[0].get<double>(), e[1].get<double>()});
    }
    return pts;
}

} // namespace

Instance parse_instance(const std::string& bytes) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed instance document: ") + e.what());
    }
    if (!doc.is_object()) throw std::invalid_argument("instance document must be an object");

    for (const char* field : {"version", "customers", "sites", "radius", "p", "r"}) {
        if (!doc.contains(field))
            throw std::invalid_argument(std::string("missing field ") + field);
    }
    if (!doc["version"].is_number_integer() || doc["version"].get<int>() != 1)
        throw std::invalid_argument("version must be 1");

    Instance inst;
    inst.customers = parse_points(doc["customers"], "customers");
    inst.sites = parse_points(doc["sites"], "sites");
    if (!doc["radius"].is_number()) throw std::invalid_argument("radius must be a number");
    inst.radius = doc["radius"].get<double>();
    if (!doc["p"].is_number_integer()) throw std::invalid_argument("p must be an integer");
    if (!doc["r"].is_number_integer()) throw std::invalid_argument("r must be an integer");
    inst.p = doc["p"].get<int>();
    inst.r = doc["r"].get<int>();
    inst.rebuild_neighbor_sets();
    inst.validate();
    return inst;
}

std::string serialize_instance(const Instance& inst) {
    inst.validate();
    nlohmann::json doc;
    doc["version"] = 1;
    auto points = [](const std::vector<Point>& pts) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& p : pts) arr.push_back({p[0], p[1]});
        return arr;
    };
    doc["customers"] = points(inst.customers);
    doc["sites"] = points(inst.sites);
    doc["radius"] = inst.radius;
    doc["p"] = inst.p;
    doc["r"] = inst.r;
    return doc.dump();
}

Instance load_instance(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open instance file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_instance(buf.str());
}

void save_instance(const Instance& inst, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write instance file: " + path);
    out << serialize_instance(inst);
    out << '\n';
}

} // namespace mclip
