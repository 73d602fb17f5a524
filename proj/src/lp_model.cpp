#include "mclip/lp_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mclip {

SingleLevelModel build_single_level_model(const Instance& inst, bool symmetry_breaking,
                                          const ExactCaps& caps) {
    inst.validate();
    const std::int64_t n_patterns = binomial_capped(inst.p, inst.r, caps.lp_pattern_cap);
    if (n_patterns > caps.lp_pattern_cap)
        throw std::runtime_error("single-level export: C(p,r) exceeds pattern cap");

    SingleLevelModel model;
    model.n_customers = inst.num_customers();
    model.n_sites = inst.num_sites();
    model.p = inst.p;
    model.r = inst.r;
    model.symmetry_breaking = symmetry_breaking;

    if (inst.r == 0) {
        model.patterns.push_back({});
    } else {
        std::vector<int> pattern(inst.r);
        for (int i = 0; i < inst.r; ++i) pattern[i] = i;
        do {
            model.patterns.push_back(pattern);
        } while (next_combination(pattern, inst.p));
    }
    return model;
}

namespace {

std::string xvar(int j, int k) { // 1-based names
    return "x_" + std::to_string(j + 1) + "_" + std::to_string(k + 1);
}

} // namespace

std::string write_lp(const SingleLevelModel& model, const Instance& inst) {
    std::ostringstream out;
    const int nI = model.n_customers;
    const int nJ = model.n_sites;
    const int p = model.p;
    const int W = static_cast<int>(model.patterns.size());

    out << "Maximize\n obj:";
    for (int i = 0; i < nI; ++i) out << (i == 0 ? " " : " + ") << "y_" << (i + 1);
    out << " + zp\n";

    out << "Subject To\n";
    for (int k = 0; k < p; ++k) {
        out << " e9_" << (k + 1) << ":";
        for (int j = 0; j < nJ; ++j) out << (j == 0 ? " " : " + ") << xvar(j, k);
        out << " = 1\n";
    }
    for (int j = 0; j < nJ; ++j) {
        out << " e10_" << (j + 1) << ":";
        for (int k = 0; k < p; ++k) out << (k == 0 ? " " : " + ") << xvar(j, k);
        out << " <= 1\n";
    }
    for (int i = 0; i < nI; ++i) {
        out << " e11_" << (i + 1) << ":";
        for (int k = 0; k < p; ++k)
            for (int j : inst.neighbor_sets[i]) out << " + " << xvar(j, k);
        out << " - y_" << (i + 1) << " >= 0\n";
    }
    for (int w = 0; w < W; ++w) {
        const auto& hit = model.patterns[w];
        for (int i = 0; i < nI; ++i) {
            out << " e12_" << (i + 1) << "_" << (w + 1) << ":";
            for (int k = 0; k < p; ++k) {
                if (std::binary_search(hit.begin(), hit.end(), k)) continue;
                for (int j : inst.neighbor_sets[i]) out << " + " << xvar(j, k);
            }
            out << " - yp_" << (i + 1) << "_" << (w + 1) << " >= 0\n";
        }
    }
    for (int w = 0; w < W; ++w) {
        out << " e13_" << (w + 1) << ":";
        for (int i = 0; i < nI; ++i) out << (i == 0 ? " " : " + ") << "yp_" << (i + 1) << "_" << (w + 1);
        out << " - zp >= 0\n";
    }
    if (model.symmetry_breaking) {
        // Cumulative ordering: slot k sits at a lower-numbered site than slot k+1.
        for (int k = 0; k + 1 < p; ++k) {
            for (int s = 0; s < nJ; ++s) {
                out << " e14_" << (k + 1) << "_" << (s + 1) << ":";
                for (int j = 0; j <= s; ++j) out << (j == 0 ? " " : " + ") << xvar(j, k);
                for (int j = 0; j <= s; ++j) out << " - " << xvar(j, k + 1);
                out << " >= 0\n";
            }
        }
    }

    out << "Bounds\n";
    for (int i = 0; i < nI; ++i) out << " 0 <= y_" << (i + 1) << " <= 1\n";
    for (int w = 0; w < W; ++w)
        for (int i = 0; i < nI; ++i)
            out << " 0 <= yp_" << (i + 1) << "_" << (w + 1) << " <= 1\n";
    out << " zp >= 0\n";

    out << "Binaries\n";
    for (int k = 0; k < p; ++k) {
        out << ' ';
        for (int j = 0; j < nJ; ++j) out << (j == 0 ? "" : " ") << xvar(j, k);
        out << '\n';
    }
    out << "End\n";
    return out.str();
}

std::string export_single_level_lp(const Instance& inst, bool symmetry_breaking,
                                   const ExactCaps& caps) {
    return write_lp(build_single_level_model(inst, symmetry_breaking, caps), inst);
}

// --- parser ---------------------------------------------------------------

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

bool is_var_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_var_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

// Parses "<terms> [sense rhs]" where terms are [+|-] [num] var.
void parse_expression(const std::string& text, std::map<std::string, double>& coef,
                      char* sense, double* rhs) {
    std::size_t i = 0;
    const std::size_t n = text.size();
    double sign = 1.0;
    bool pending_sign = false;
    while (i < n) {
        const char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) { ++i; continue; }
        if (c == '+') { sign = pending_sign ? sign : 1.0; pending_sign = true; ++i; continue; }
        if (c == '-') { sign = pending_sign ? -sign : -1.0; pending_sign = true; ++i; continue; }
        if (c == '<' || c == '>' || c == '=') {
            if (sense == nullptr) throw std::invalid_argument("lp parse: unexpected relation");
            *sense = (c == '=') ? '=' : c;
            ++i;
            if (i < n && text[i] == '=') ++i;
            const std::string tail = trim(text.substr(i));
            *rhs = std::stod(tail);
            return;
        }
        double value = 1.0;
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            std::size_t used = 0;
            value = std::stod(text.substr(i), &used);
            i += used;
            while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        }
        if (i >= n || !is_var_start(text[i]))
            throw std::invalid_argument("lp parse: expected variable name in '" + text + "'");
        std::size_t start = i;
        while (i < n && is_var_char(text[i])) ++i;
        coef[text.substr(start, i - start)] += sign * value;
        sign = 1.0;
        pending_sign = false;
    }
    if (sense != nullptr) throw std::invalid_argument("lp parse: row has no relation: " + text);
}

} // namespace

LpFile parse_lp(const std::string& text) {
    LpFile lp;
    enum class Section { None, Objective, Rows, Bounds, Binaries, Done };
    Section section = Section::None;

    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '\\') continue;
        const std::string low = lower(t);
        if (low == "maximize" || low == "maximise" || low == "max") {
            section = Section::Objective; lp.maximize = true; continue;
        }
        if (low == "minimize" || low == "minimise" || low == "min") {
            section = Section::Objective; lp.maximize = false; continue;
        }
        if (low == "subject to" || low == "st" || low == "s.t.") { section = Section::Rows; continue; }
        if (low == "bounds") { section = Section::Bounds; continue; }
        if (low == "binaries" || low == "binary" || low == "bin") { section = Section::Binaries; continue; }
        if (low == "end") { section = Section::Done; continue; }

        switch (section) {
        case Section::Objective: {
            std::string body = t;
            const std::size_t colon = t.find(':');
            if (colon != std::string::npos) body = t.substr(colon + 1);
            parse_expression(body, lp.objective, nullptr, nullptr);
            break;
        }
        case Section::Rows: {
            const std::size_t colon = t.find(':');
            if (colon == std::string::npos)
                throw std::invalid_argument("lp parse: unnamed row: " + t);
            LpRow row;
            row.name = trim(t.substr(0, colon));
            parse_expression(t.substr(colon + 1), row.coef, &row.sense, &row.rhs);
            lp.rows.push_back(std::move(row));
            break;
        }
        case Section::Bounds: {
            // Either "lo <= var <= hi" or "var >= lo".
            std::istringstream bs(t);
            std::vector<std::string> tok;
            std::string w;
            while (bs >> w) tok.push_back(w);
            if (tok.size() == 5 && tok[1] == "<=" && tok[3] == "<=") {
                lp.bounds[tok[2]] = {std::stod(tok[0]), std::stod(tok[4])};
            } else if (tok.size() == 3 && tok[1] == ">=") {
                lp.bounds[tok[0]] = {std::stod(tok[2]), std::numeric_limits<double>::infinity()};
            } else if (tok.size() == 3 && tok[1] == "<=") {
                lp.bounds[tok[0]] = {0.0, std::stod(tok[2])};
            } else {
                throw std::invalid_argument("lp parse: unsupported bound line: " + t);
            }
            break;
        }
        case Section::Binaries: {
            std::istringstream names(t);
            std::string name;
            while (names >> name) lp.binaries.insert(name);
            break;
        }
        default:
            throw std::invalid_argument("lp parse: content outside any section: " + t);
        }
    }
    if (lp.objective.empty()) throw std::invalid_argument("lp parse: missing objective");
    return lp;
}

// --- brute-force evaluator --------------------------------------------------

namespace {

struct XVarIndex {
    int n_sites = 0;
    int n_slots = 0;
    // var name -> (site, slot), 0-based
    std::map<std::string, std::pair<int, int>> by_name;
};

XVarIndex index_x_vars(const LpFile& lp) {
    XVarIndex idx;
    for (const std::string& name : lp.binaries) {
        if (name.rfind("x_", 0) != 0) continue;
        const std::size_t second = name.find('_', 2);
        if (second == std::string::npos) continue;
        const int j = std::stoi(name.substr(2, second - 2)) - 1;
        const int k = std::stoi(name.substr(second + 1)) - 1;
        idx.by_name[name] = {j, k};
        idx.n_sites = std::max(idx.n_sites, j + 1);
        idx.n_slots = std::max(idx.n_slots, k + 1);
    }
    if (idx.by_name.empty())
        throw std::invalid_argument("lp evaluator: no binary x_j_k variables found");
    return idx;
}

double row_x_activity(const LpRow& row, const XVarIndex& idx, const std::vector<int>& slot_site) {
    double activity = 0.0;
    for (const auto& [name, c] : row.coef) {
        auto it = idx.by_name.find(name);
        if (it == idx.by_name.end()) continue;
        const auto [j, k] = it->second;
        if (slot_site[k] == j) activity += c;
    }
    return activity;
}

bool row_satisfied(double lhs, char sense, double rhs) {
    constexpr double kTol = 1e-9;
    if (sense == '<') return lhs <= rhs + kTol;
    if (sense == '>') return lhs >= rhs - kTol;
    return std::abs(lhs - rhs) <= kTol;
}

} // namespace

double lp_brute_force_optimum(const LpFile& lp) {
    const XVarIndex idx = index_x_vars(lp);

    // Split rows: those touching only x variables gate the assignment
    // enumeration; the rest imply ceilings for one non-x variable each.
    std::vector<const LpRow*> x_rows;
    // var -> rows where it appears with coefficient -1 alongside x terms only
    std::map<std::string, std::vector<const LpRow*>> ceil_rows;
    std::vector<const LpRow*> linked_rows; // rows mixing several non-x vars (zp rows)
    for (const LpRow& row : lp.rows) {
        std::vector<std::string> non_x;
        for (const auto& [name, c] : row.coef) {
            if (idx.by_name.find(name) == idx.by_name.end()) non_x.push_back(name);
        }
        if (non_x.empty()) {
            x_rows.push_back(&row);
        } else if (non_x.size() == 1 && row.coef.at(non_x[0]) < 0 && row.sense == '>') {
            ceil_rows[non_x[0]].push_back(&row);
        } else {
            linked_rows.push_back(&row);
        }
    }

    double best = -std::numeric_limits<double>::infinity();

    // One site per slot; e9 rows are satisfied by construction, every other
    // x-only row is checked explicitly.
    std::vector<int> slot_site(idx.n_slots, 0);
    const auto var_upper = [&](const std::string& name) {
        auto it = lp.bounds.find(name);
        return it == lp.bounds.end() ? std::numeric_limits<double>::infinity() : it->second.second;
    };

    std::map<std::string, double> values;
    const std::function<void(int)> recurse = [&](int slot) {
        if (slot == idx.n_slots) {
            for (const LpRow* row : x_rows) {
                if (!row_satisfied(row_x_activity(*row, idx, slot_site), row->sense, row->rhs))
                    return;
            }
            values.clear();
            // Pass 1: ceilings implied purely by x terms (y_i and yp_i_w).
            for (const auto& [name, rows] : ceil_rows) {
                double ceiling = var_upper(name);
                for (const LpRow* row : rows) {
                    const double slack = row_x_activity(*row, idx, slot_site) - row->rhs;
                    ceiling = std::min(ceiling, slack / -row->coef.at(name));
                }
                values[name] = std::max(0.0, ceiling);
            }
            // Pass 2: rows linking computed vars to one remaining var (zp).
            std::map<std::string, double> ceilings2;
            for (const LpRow* row : linked_rows) {
                std::string target;
                double target_coef = 0.0;
                double fixed = row_x_activity(*row, idx, slot_site);
                for (const auto& [name, c] : row->coef) {
                    if (idx.by_name.count(name)) continue;
                    auto it = values.find(name);
                    if (it != values.end()) {
                        fixed += c * it->second;
                    } else if (target.empty()) {
                        target = name;
                        target_coef = c;
                    } else {
                        throw std::invalid_argument("lp evaluator: row links two unresolved vars: " + row->name);
                    }
                }
                if (target.empty() || target_coef >= 0 || row->sense != '>')
                    throw std::invalid_argument("lp evaluator: unsupported row shape: " + row->name);
                const double ceiling = (fixed - row->rhs) / -target_coef;
                auto it = ceilings2.find(target);
                if (it == ceilings2.end()) ceilings2[target] = ceiling;
                else it->second = std::min(it->second, ceiling);
            }
            for (auto& [name, ceiling] : ceilings2)
                values[name] = std::max(0.0, std::min(ceiling, var_upper(name)));

            double obj = 0.0;
            for (const auto& [name, c] : lp.objective) {
                auto xit = idx.by_name.find(name);
                if (xit != idx.by_name.end()) {
                    const auto [j, k] = xit->second;
                    obj += (slot_site[k] == j) ? c : 0.0;
                } else {
                    auto vit = values.find(name);
                    if (vit != values.end()) obj += c * vit->second;
                }
            }
            best = std::max(best, obj);
            return;
        }
        for (int j = 0; j < idx.n_sites; ++j) {
            bool used = false;
            for (int s = 0; s < slot; ++s) {
                if (slot_site[s] == j) { used = true; break; }
            }
            if (used) continue; // anti-co-location, still re-checked via e10 rows
            slot_site[slot] = j;
            recurse(slot + 1);
        }
    };
    recurse(0);

    if (!std::isfinite(best))
        throw std::runtime_error("lp evaluator: no feasible slot assignment");
    return best;
}

} // namespace mclip
