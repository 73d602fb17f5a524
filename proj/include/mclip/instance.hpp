#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace mclip {

using Point = std::array<double, 2>;

// A facility-coverage instance. `customers` and `sites` are separate
// lists so imported data may split them; synthetic generation always
// co-locates them. `neighbor_sets[i]` lists the sites within `radius`
// of customer i (closed ball, ascending site indices). Instances are
// immutable after construction and safe to share across threads.
struct Instance {
    std::vector<Point> customers;
    std::vector<Point> sites;
    double radius = 0.0;
    int p = 0;
    int r = 0;
    std::vector<std::vector<int>> neighbor_sets;

    int num_customers() const { return static_cast<int>(customers.size()); }
    int num_sites() const { return static_cast<int>(sites.size()); }

    // True when the customer list is exactly the site list. The neural
    // pipeline requires this; classical solvers do not.
    bool colocated() const;

    // Throws std::invalid_argument naming the offending field.
    void validate() const;

    void rebuild_neighbor_sets();
};

// Closed-ball membership: j in N_i iff dist(customers[i], sites[j]) <= radius.
// Compares squared distances, so the boundary case is handled without a sqrt.
std::vector<std::vector<int>> build_neighbor_sets(const std::vector<Point>& customers,
                                                  const std::vector<Point>& sites,
                                                  double radius);

// Parameters for synthetic generation: n co-located customer/site points
// drawn i.i.d. uniform on the unit square.
struct GenSpec {
    int n = 20;
    int p = 4;
    int r = 1;
    double radius = 0.3;
    std::uint64_t seed = 0;
    int count = 1;

    void validate() const;
};

// Deterministic function of (spec.seed, index): the point stream is
// mt19937_64 seeded with mix_seed(seed, index), so instances are
// independent of generation order.
Instance generate_uniform_instance(const GenSpec& spec, int index);

// UTF-8 JSON document, fields: version (1), customers, sites, radius, p, r.
// neighbor_sets are never serialized; parse recomputes them.
Instance parse_instance(const std::string& bytes);
std::string serialize_instance(const Instance& inst);

Instance load_instance(const std::string& path);
void save_instance(const Instance& inst, const std::string& path);

} // namespace mclip
