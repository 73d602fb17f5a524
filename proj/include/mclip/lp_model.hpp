#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mclip/exact.hpp"
#include "mclip/instance.hpp"

namespace mclip {

// Single-level reformulation data: p numbered facility slots and the
// C(p, r) interdiction patterns over them. Variables are x_j_k (slot k
// at site j), y_i, yp_i_w and zp.
struct SingleLevelModel {
    int n_customers = 0;
    int n_sites = 0;
    int p = 0;
    int r = 0;
    std::vector<std::vector<int>> patterns; // r-subsets of slot indices {0..p-1}, lexicographic
    bool symmetry_breaking = true;
};

SingleLevelModel build_single_level_model(const Instance& inst, bool symmetry_breaking,
                                          const ExactCaps& caps = {});

// CPLEX-LP-dialect text: Maximize / Subject To / Bounds / Binaries / End.
// Variables x_{j}_{k}, y_{i}, yp_{i}_{w} (1-based), zp; rows named by
// equation number and indices (e9_k, e10_j, e11_i, e12_i_w, e13_w, e14_k_s).
std::string write_lp(const SingleLevelModel& model, const Instance& inst);

std::string export_single_level_lp(const Instance& inst, bool symmetry_breaking,
                                   const ExactCaps& caps = {});

// --- reader + independent evaluator -------------------------------------
// A minimal parser for the dialect written above, used to round-trip our
// own exports and to score them independently of the solver path.

struct LpRow {
    std::string name;
    std::map<std::string, double> coef;
    char sense = '>'; // '<', '>', '='
    double rhs = 0.0;
};

struct LpFile {
    bool maximize = true;
    std::map<std::string, double> objective;
    std::vector<LpRow> rows;
    std::map<std::string, std::pair<double, double>> bounds; // var -> [lo, hi]
    std::set<std::string> binaries;
};

LpFile parse_lp(const std::string& text);

// Optimum of a parsed [MCLIP-2] export by brute force: enumerates every
// binary x assignment that satisfies the x-only rows (slot assignment,
// anti-co-location and, when present, the symmetry rows), then sets each
// remaining variable to its implied optimal value (y and yp to the
// minimum of their row-implied ceilings and their upper bound, zp to the
// smallest pattern coverage). Independent of exact_solve.
double lp_brute_force_optimum(const LpFile& lp);

} // namespace mclip
