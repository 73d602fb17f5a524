#include "mclip/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace mclip {

void PolicyDims::validate() const {
    if (d <= 0 || h <= 0 || L <= 0 || f <= 0)
        throw std::invalid_argument("policy dims must be positive");
    if (d % h != 0)
        throw std::invalid_argument("embedding dim must be divisible by head count");
}

std::size_t policy_param_count(const PolicyDims& dims) {
    dims.validate();
    const std::size_t d = dims.d, f = dims.f, L = dims.L;
    const std::size_t F = PolicyDims::features, G = PolicyDims::globals;
    return d * F + d + L * (4 * d * d + 2 * f * d + f + 3 * d) + d * (d + G) + d + d * d;
}

namespace {

struct ParamLayout {
    struct Layer {
        std::size_t wq, wk, wv, wo, g1, w1, b1, w2, b2, g2;
    };
    std::size_t w_in, b_in, w_ctx, b_ctx, w_out, total;
    std::vector<Layer> layers;

    explicit ParamLayout(const PolicyDims& dims) {
        const std::size_t d = dims.d, f = dims.f;
        const std::size_t F = PolicyDims::features, G = PolicyDims::globals;
        std::size_t off = 0;
        w_in = off; off += d * F;
        b_in = off; off += d;
        layers.resize(dims.L);
        for (auto& l : layers) {
            l.wq = off; off += d * d;
            l.wk = off; off += d * d;
            l.wv = off; off += d * d;
            l.wo = off; off += d * d;
            l.g1 = off; off += d;
            l.w1 = off; off += f * d;
            l.b1 = off; off += f;
            l.w2 = off; off += d * f;
            l.b2 = off; off += d;
            l.g2 = off; off += d;
        }
        w_ctx = off; off += d * (d + G);
        b_ctx = off; off += d;
        w_out = off; off += d * d;
        total = off;
    }
};

constexpr double kNormEps = 1e-5;

} // namespace

PolicyParams init_params(Role role, const PolicyDims& dims, std::uint64_t seed) {
    dims.validate();
    const ParamLayout layout(dims);
    PolicyParams p;
    p.role = role;
    p.dims = dims;
    p.seed_lineage = seed;
    p.data.assign(layout.total, 0.0);

    Rng rng = Rng::from_stream(seed, role == Role::Location ? 1 : 2);
    auto fill_uniform = [&](std::size_t off, std::size_t count, int fan_in) {
        const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < count; ++i) p.data[off + i] = rng.uniform(-a, a);
    };
    auto fill_ones = [&](std::size_t off, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) p.data[off + i] = 1.0;
    };

    const std::size_t d = dims.d, f = dims.f;
    const std::size_t F = PolicyDims::features, G = PolicyDims::globals;
    fill_uniform(layout.w_in, d * F, PolicyDims::features);
    for (const auto& l : layout.layers) {
        fill_uniform(l.wq, d * d, dims.d);
        fill_uniform(l.wk, d * d, dims.d);
        fill_uniform(l.wv, d * d, dims.d);
        fill_uniform(l.wo, d * d, dims.d);
        fill_ones(l.g1, d);
        fill_uniform(l.w1, f * d, dims.d);
        fill_uniform(l.w2, d * f, dims.f);
        fill_ones(l.g2, d);
    }
    fill_uniform(layout.w_ctx, d * (d + G), dims.d + PolicyDims::globals);
    fill_uniform(layout.w_out, d * d, dims.d);
    return p;
}

double Rollout::total_log_prob() const {
    double s = 0.0;
    for (double lp : log_probs) s += lp;
    return s;
}

std::vector<int> Rollout::sorted_actions() const {
    std::vector<int> v = actions;
    std::sort(v.begin(), v.end());
    return v;
}

// --- checkpoints ------------------------------------------------------------

void save_checkpoint(const PolicyParams& params, const std::string& path) {
    nlohmann::json header;
    header["version"] = 1;
    header["role"] = params.role == Role::Location ? "location" : "interdiction";
    header["d"] = params.dims.d;
    header["h"] = params.dims.h;
    header["L"] = params.dims.L;
    header["f"] = params.dims.f;
    header["feature_schema"] =
        "x,y,located,covered_before,interdicted,covered_now|steps_remaining_frac,fraction_covered";
    header["seed_lineage"] = params.seed_lineage;
    header["epoch"] = params.epoch;
    header["n_params"] = params.data.size();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << header.dump() << '\n';
    for (double v : params.data) {
        const float f32 = static_cast<float>(v);
        out.write(reinterpret_cast<const char*>(&f32), sizeof(f32));
    }
    if (!out) throw std::runtime_error("short write on checkpoint: " + path);
}

PolicyParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("checkpoint missing header: " + path);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("checkpoint header is not valid JSON: ") + e.what());
    }

    PolicyParams p;
    const std::string role = header.at("role").get<std::string>();
    if (role == "location") p.role = Role::Location;
    else if (role == "interdiction") p.role = Role::Interdiction;
    else throw std::runtime_error("checkpoint role must be location or interdiction");
    p.dims.d = header.at("d").get<int>();
    p.dims.h = header.at("h").get<int>();
    p.dims.L = header.at("L").get<int>();
    p.dims.f = header.at("f").get<int>();
    p.seed_lineage = header.at("seed_lineage").get<std::uint64_t>();
    p.epoch = header.at("epoch").get<int>();
    const std::size_t n_params = header.at("n_params").get<std::size_t>();
    if (n_params != policy_param_count(p.dims))
        throw std::runtime_error("checkpoint n_params does not match its dims");

    p.data.resize(n_params);
    for (std::size_t i = 0; i < n_params; ++i) {
        float f32 = 0.0f;
        in.read(reinterpret_cast<char*>(&f32), sizeof(f32));
        if (!in) throw std::runtime_error("checkpoint truncated: " + path);
        p.data[i] = static_cast<double>(f32);
    }
    return p;
}

// --- state features ----------------------------------------------------------

StateFeatures build_state_features(const Instance& inst, const CoverageKernel& kernel,
                                   Role role, const std::vector<int>& chosen,
                                   const std::vector<int>* conditioning) {
    const int n = inst.num_sites();
    constexpr int F = PolicyDims::features;
    StateFeatures sf;
    sf.nodes.assign(static_cast<std::size_t>(n) * F, 0.0);

    const int words = kernel.words();
    std::vector<std::uint64_t> now(words, 0);
    std::vector<std::uint64_t> before(words, 0);

    int budget = 0;
    int taken = static_cast<int>(chosen.size());
    std::vector<std::uint8_t> located(n, 0), interdicted(n, 0);
    if (role == Role::Location) {
        budget = inst.p;
        kernel.union_into(chosen, now.data());
        before = now;
        for (int a : chosen) located[a] = 1;
    } else {
        budget = inst.r;
        kernel.union_into(*conditioning, before.data());
        for (int a : *conditioning) located[a] = 1;
        for (int a : chosen) interdicted[a] = 1;
        std::vector<int> survivors;
        survivors.reserve(conditioning->size());
        for (int a : *conditioning)
            if (!interdicted[a]) survivors.push_back(a);
        kernel.union_into(survivors, now.data());
    }

    int covered = 0;
    for (int w = 0; w < words; ++w) covered += std::popcount(now[w]);

    for (int i = 0; i < n; ++i) {
        double* row = sf.nodes.data() + static_cast<std::size_t>(i) * F;
        row[0] = inst.sites[i][0];
        row[1] = inst.sites[i][1];
        row[2] = located[i];
        row[3] = (before[i / 64] >> (i % 64)) & 1ULL ? 1.0 : 0.0;
        row[4] = interdicted[i];
        row[5] = (now[i / 64] >> (i % 64)) & 1ULL ? 1.0 : 0.0;
    }
    sf.globals[0] = budget > 0 ? static_cast<double>(budget - taken) / budget : 0.0;
    sf.globals[1] = inst.num_customers() > 0
                        ? static_cast<double>(covered) / inst.num_customers()
                        : 0.0;
    return sf;
}

// --- evaluator ---------------------------------------------------------------

struct PolicyEvaluator::Buffers {
    ParamLayout layout;
    int n = 0;

    std::vector<double> x;  // n*F
    std::vector<double> h0; // n*d
    struct LayerActs {
        std::vector<double> q, k, v;       // n*d
        std::vector<double> p;             // h*n*n
        std::vector<double> z;             // n*d
        std::vector<double> n1;            // n*d
        std::vector<double> inv_sig1;      // n
        std::vector<double> h1;            // n*d
        std::vector<double> u;             // n*f
        std::vector<double> n2;            // n*d
        std::vector<double> inv_sig2;      // n
        std::vector<double> hout;          // n*d
    };
    std::vector<LayerActs> layers;
    std::vector<double> graph;             // d
    std::vector<double> ctx;               // d+G
    std::vector<double> qdec;              // d
    std::vector<double> kdec;              // n*d
    std::vector<double> sdec, tdec, probs; // n
    std::vector<std::uint8_t> feasible;    // n

    // backward scratch
    std::vector<double> dh_out, dh1, da, dz, dq, dk, dv, dkdec; // n*d
    std::vector<double> dqdec, dgraph, drow_d;                  // d
    std::vector<double> dctx;                                   // d+G
    std::vector<double> drow_f;                                 // f
    std::vector<double> dp;                                     // n

    std::vector<int> chosen;

    explicit Buffers(const PolicyDims& dims) : layout(dims) {}

    void ensure(const PolicyDims& dims, int n_nodes) {
        if (n == n_nodes) return;
        n = n_nodes;
        const std::size_t nd = static_cast<std::size_t>(n) * dims.d;
        const std::size_t nf = static_cast<std::size_t>(n) * dims.f;
        x.resize(static_cast<std::size_t>(n) * PolicyDims::features);
        h0.resize(nd);
        layers.resize(dims.L);
        for (auto& l : layers) {
            l.q.resize(nd);
            l.k.resize(nd);
            l.v.resize(nd);
            l.p.resize(static_cast<std::size_t>(dims.h) * n * n);
            l.z.resize(nd);
            l.n1.resize(nd);
            l.inv_sig1.resize(n);
            l.h1.resize(nd);
            l.u.resize(nf);
            l.n2.resize(nd);
            l.inv_sig2.resize(n);
            l.hout.resize(nd);
        }
        graph.resize(dims.d);
        ctx.resize(dims.d + PolicyDims::globals);
        qdec.resize(dims.d);
        kdec.resize(nd);
        sdec.resize(n);
        tdec.resize(n);
        probs.resize(n);
        feasible.resize(n);

        dh_out.resize(nd);
        dh1.resize(nd);
        da.resize(nd);
        dz.resize(nd);
        dq.resize(nd);
        dk.resize(nd);
        dv.resize(nd);
        dkdec.resize(nd);
        dqdec.resize(dims.d);
        dgraph.resize(dims.d);
        drow_d.resize(std::max<std::size_t>(dims.d, dims.f));
        dctx.resize(dims.d + PolicyDims::globals);
        drow_f.resize(dims.f);
        dp.resize(n);
    }
};

PolicyEvaluator::PolicyEvaluator(const PolicyParams& params)
    : params_(&params), buf_(std::make_unique<Buffers>(params.dims)) {
    params.dims.validate();
    if (params.data.size() != buf_->layout.total)
        throw std::invalid_argument("policy params data size does not match dims");
}

PolicyEvaluator::~PolicyEvaluator() = default;
PolicyEvaluator::PolicyEvaluator(PolicyEvaluator&&) noexcept = default;
PolicyEvaluator& PolicyEvaluator::operator=(PolicyEvaluator&&) noexcept = default;

void PolicyEvaluator::rebind(const PolicyParams& params) {
    if (!(params.dims == params_->dims))
        throw std::invalid_argument("rebind requires identical policy dims");
    params_ = &params;
}

void PolicyEvaluator::forward(int n) {
    Buffers& b = *buf_;
    const PolicyDims& dims = params_->dims;
    const double* w = params_->data.data();
    const int d = dims.d, h = dims.h, f = dims.f, L = dims.L;
    constexpr int F = PolicyDims::features;
    constexpr int G = PolicyDims::globals;
    const int dk = d / h;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

    // input projection
    for (int i = 0; i < n; ++i) {
        const double* xi = b.x.data() + static_cast<std::size_t>(i) * F;
        double* hi = b.h0.data() + static_cast<std::size_t>(i) * d;
        const double* win = w + b.layout.w_in;
        const double* bin = w + b.layout.b_in;
        for (int rr = 0; rr < d; ++rr) {
            double acc = bin[rr];
            const double* row = win + static_cast<std::size_t>(rr) * F;
            for (int c = 0; c < F; ++c) acc += row[c] * xi[c];
            hi[rr] = acc;
        }
    }

    const double* hin = b.h0.data();
    for (int l = 0; l < L; ++l) {
        auto& acts = b.layers[l];
        const auto& lw = b.layout.layers[l];

        // Q, K, V projections
        for (int i = 0; i < n; ++i) {
            const double* src = hin + static_cast<std::size_t>(i) * d;
            double* qi = acts.q.data() + static_cast<std::size_t>(i) * d;
            double* ki = acts.k.data() + static_cast<std::size_t>(i) * d;
            double* vi = acts.v.data() + static_cast<std::size_t>(i) * d;
            for (int rr = 0; rr < d; ++rr) {
                const double* wq = w + lw.wq + static_cast<std::size_t>(rr) * d;
                const double* wk = w + lw.wk + static_cast<std::size_t>(rr) * d;
                const double* wv = w + lw.wv + static_cast<std::size_t>(rr) * d;
                double aq = 0, ak = 0, av = 0;
#pragma omp simd reduction(+ : aq, ak, av)
                for (int c = 0; c < d; ++c) {
                    const double s = src[c];
                    aq += wq[c] * s;
                    ak += wk[c] * s;
                    av += wv[c] * s;
                }
                qi[rr] = aq;
                ki[rr] = ak;
                vi[rr] = av;
            }
        }

        // scaled dot-product attention per head
        for (int head = 0; head < h; ++head) {
            const int off = head * dk;
            for (int i = 0; i < n; ++i) {
                double* prow = acts.p.data() +
                               (static_cast<std::size_t>(head) * n + i) * n;
                const double* qi = acts.q.data() + static_cast<std::size_t>(i) * d + off;
                double mx = -std::numeric_limits<double>::infinity();
                for (int j = 0; j < n; ++j) {
                    const double* kj = acts.k.data() + static_cast<std::size_t>(j) * d + off;
                    double s = 0;
#pragma omp simd reduction(+ : s)
                    for (int c = 0; c < dk; ++c) s += qi[c] * kj[c];
                    s *= inv_sqrt_dk;
                    prow[j] = s;
                    mx = std::max(mx, s);
                }
                double denom = 0;
                for (int j = 0; j < n; ++j) {
                    prow[j] = std::exp(prow[j] - mx);
                    denom += prow[j];
                }
                const double inv = 1.0 / denom;
                for (int j = 0; j < n; ++j) prow[j] *= inv;

                double* zi = acts.z.data() + static_cast<std::size_t>(i) * d + off;
                for (int c = 0; c < dk; ++c) zi[c] = 0;
                for (int j = 0; j < n; ++j) {
                    const double pij = prow[j];
                    const double* vj = acts.v.data() + static_cast<std::size_t>(j) * d + off;
                    for (int c = 0; c < dk; ++c) zi[c] += pij * vj[c];
                }
            }
        }

        // output projection, residual, normalization, feed-forward
        const double* g1 = w + lw.g1;
        const double* g2 = w + lw.g2;
        for (int i = 0; i < n; ++i) {
            const double* src = hin + static_cast<std::size_t>(i) * d;
            const double* zi = acts.z.data() + static_cast<std::size_t>(i) * d;
            double* n1i = acts.n1.data() + static_cast<std::size_t>(i) * d;
            double* h1i = acts.h1.data() + static_cast<std::size_t>(i) * d;

            // s1 = hin + Wo z, computed into n1 then standardized in place
            double mean = 0;
            for (int rr = 0; rr < d; ++rr) {
                const double* wo = w + lw.wo + static_cast<std::size_t>(rr) * d;
                double acc = 0;
#pragma omp simd reduction(+ : acc)
                for (int c = 0; c < d; ++c) acc += wo[c] * zi[c];
                const double s1 = src[rr] + acc;
                n1i[rr] = s1;
                mean += s1;
            }
            mean /= d;
            double var = 0;
            for (int rr = 0; rr < d; ++rr) {
                const double c = n1i[rr] - mean;
                var += c * c;
            }
            var /= d;
            const double inv_sig = 1.0 / std::sqrt(var + kNormEps);
            acts.inv_sig1[i] = inv_sig;
            for (int rr = 0; rr < d; ++rr) {
                n1i[rr] = (n1i[rr] - mean) * inv_sig;
                h1i[rr] = n1i[rr] * g1[rr];
            }

            // position-wise feed-forward with relu
            double* ui = acts.u.data() + static_cast<std::size_t>(i) * f;
            const double* b1 = w + lw.b1;
            for (int t = 0; t < f; ++t) {
                const double* w1 = w + lw.w1 + static_cast<std::size_t>(t) * d;
                double acc = b1[t];
#pragma omp simd reduction(+ : acc)
                for (int c = 0; c < d; ++c) acc += w1[c] * h1i[c];
                ui[t] = acc > 0 ? acc : 0;
            }
            double* n2i = acts.n2.data() + static_cast<std::size_t>(i) * d;
            const double* b2 = w + lw.b2;
            double mean2 = 0;
            for (int rr = 0; rr < d; ++rr) {
                const double* w2 = w + lw.w2 + static_cast<std::size_t>(rr) * f;
                double acc = b2[rr];
#pragma omp simd reduction(+ : acc)
                for (int t = 0; t < f; ++t) acc += w2[t] * ui[t];
                const double s2 = h1i[rr] + acc;
                n2i[rr] = s2;
                mean2 += s2;
            }
            mean2 /= d;
            double var2 = 0;
            for (int rr = 0; rr < d; ++rr) {
                const double c = n2i[rr] - mean2;
                var2 += c * c;
            }
            var2 /= d;
            const double inv_sig2 = 1.0 / std::sqrt(var2 + kNormEps);
            acts.inv_sig2[i] = inv_sig2;
            double* houti = acts.hout.data() + static_cast<std::size_t>(i) * d;
            for (int rr = 0; rr < d; ++rr) {
                n2i[rr] = (n2i[rr] - mean2) * inv_sig2;
                houti[rr] = n2i[rr] * g2[rr];
            }
        }
        hin = acts.hout.data();
    }

    // graph embedding = mean of node embeddings
    const double* hfinal = b.layers[L - 1].hout.data();
    for (int rr = 0; rr < d; ++rr) b.graph[rr] = 0;
    for (int i = 0; i < n; ++i) {
        const double* hi = hfinal + static_cast<std::size_t>(i) * d;
        for (int rr = 0; rr < d; ++rr) b.graph[rr] += hi[rr];
    }
    for (int rr = 0; rr < d; ++rr) {
        b.graph[rr] /= n;
        b.ctx[rr] = b.graph[rr]; // ctx tail (globals) is set by the caller
    }

    // decoder: context query against node keys
    for (int rr = 0; rr < d; ++rr) {
        const double* wc = w + b.layout.w_ctx + static_cast<std::size_t>(rr) * (d + G);
        double acc = w[b.layout.b_ctx + rr];
#pragma omp simd reduction(+ : acc)
        for (int c = 0; c < d + G; ++c) acc += wc[c] * b.ctx[c];
        b.qdec[rr] = acc;
    }
    for (int j = 0; j < n; ++j) {
        const double* hj = hfinal + static_cast<std::size_t>(j) * d;
        double* kj = b.kdec.data() + static_cast<std::size_t>(j) * d;
        for (int rr = 0; rr < d; ++rr) {
            const double* wo = w + b.layout.w_out + static_cast<std::size_t>(rr) * d;
            double acc = 0;
#pragma omp simd reduction(+ : acc)
            for (int c = 0; c < d; ++c) acc += wo[c] * hj[c];
            kj[rr] = acc;
        }
        double s = 0;
#pragma omp simd reduction(+ : s)
        for (int rr = 0; rr < d; ++rr) s += b.qdec[rr] * kj[rr];
        b.sdec[j] = s * inv_sqrt_d;
        b.tdec[j] = std::tanh(b.sdec[j]);
    }

    // masked softmax over feasible nodes
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
        if (b.feasible[j]) mx = std::max(mx, kLogitClip * b.tdec[j]);
    }
    if (mx == -std::numeric_limits<double>::infinity())
        throw std::invalid_argument("no feasible action");
    double denom = 0;
    for (int j = 0; j < n; ++j) {
        if (b.feasible[j]) {
            b.probs[j] = std::exp(kLogitClip * b.tdec[j] - mx);
            denom += b.probs[j];
        } else {
            b.probs[j] = 0.0;
        }
    }
    const double inv = 1.0 / denom;
    for (int j = 0; j < n; ++j) b.probs[j] *= inv;
}

void PolicyEvaluator::backward(int n, double* grad) {
    Buffers& b = *buf_;
    const PolicyDims& dims = params_->dims;
    const double* w = params_->data.data();
    double* g = grad;
    const int d = dims.d, h = dims.h, f = dims.f, L = dims.L;
    constexpr int F = PolicyDims::features;
    constexpr int G = PolicyDims::globals;
    const int dk = d / h;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

    // b.dp currently holds dlogits (set by the caller), zero on masked nodes.
    std::fill(b.dh_out.begin(), b.dh_out.end(), 0.0);
    std::fill(b.dqdec.begin(), b.dqdec.end(), 0.0);

    const double* hfinal = b.layers[L - 1].hout.data();
    for (int j = 0; j < n; ++j) {
        const double dlogit = b.dp[j];
        double* dkj = b.dkdec.data() + static_cast<std::size_t>(j) * d;
        if (dlogit == 0.0) {
            std::fill(dkj, dkj + d, 0.0);
            continue;
        }
        const double ds = dlogit * kLogitClip * (1.0 - b.tdec[j] * b.tdec[j]) * inv_sqrt_d;
        const double* kj = b.kdec.data() + static_cast<std::size_t>(j) * d;
        for (int rr = 0; rr < d; ++rr) {
            b.dqdec[rr] += ds * kj[rr];
            dkj[rr] = ds * b.qdec[rr];
        }
    }

    // W_out and its contribution to dHout
    for (int j = 0; j < n; ++j) {
        const double* dkj = b.dkdec.data() + static_cast<std::size_t>(j) * d;
        const double* hj = hfinal + static_cast<std::size_t>(j) * d;
        double* dhj = b.dh_out.data() + static_cast<std::size_t>(j) * d;
        for (int rr = 0; rr < d; ++rr) {
            const double dr = dkj[rr];
            if (dr == 0.0) continue;
            double* gw = g + b.layout.w_out + static_cast<std::size_t>(rr) * d;
            const double* wo = w + b.layout.w_out + static_cast<std::size_t>(rr) * d;
            for (int c = 0; c < d; ++c) {
                gw[c] += dr * hj[c];
                dhj[c] += wo[c] * dr;
            }
        }
    }

    // W_ctx, b_ctx, and the graph-mean contribution to dHout
    for (int c = 0; c < d + G; ++c) b.dctx[c] = 0.0;
    for (int rr = 0; rr < d; ++rr) {
        const double dq = b.dqdec[rr];
        g[b.layout.b_ctx + rr] += dq;
        if (dq == 0.0) continue;
        double* gw = g + b.layout.w_ctx + static_cast<std::size_t>(rr) * (d + G);
        const double* wc = w + b.layout.w_ctx + static_cast<std::size_t>(rr) * (d + G);
        for (int c = 0; c < d + G; ++c) {
            gw[c] += dq * b.ctx[c];
            b.dctx[c] += wc[c] * dq;
        }
    }
    const double inv_n = 1.0 / n;
    for (int i = 0; i < n; ++i) {
        double* dhi = b.dh_out.data() + static_cast<std::size_t>(i) * d;
        for (int rr = 0; rr < d; ++rr) dhi[rr] += b.dctx[rr] * inv_n;
    }

    // encoder layers, reversed
    for (int l = L - 1; l >= 0; --l) {
        auto& acts = b.layers[l];
        const auto& lw = b.layout.layers[l];
        const double* hin = l == 0 ? b.h0.data() : b.layers[l - 1].hout.data();
        const double* g1 = w + lw.g1;
        const double* g2 = w + lw.g2;

        std::fill(b.dh1.begin(), b.dh1.end(), 0.0);
        std::fill(b.da.begin(), b.da.end(), 0.0);

        for (int i = 0; i < n; ++i) {
            const double* dhouti = b.dh_out.data() + static_cast<std::size_t>(i) * d;
            const double* n2i = acts.n2.data() + static_cast<std::size_t>(i) * d;
            const double* n1i = acts.n1.data() + static_cast<std::size_t>(i) * d;
            const double* h1i = acts.h1.data() + static_cast<std::size_t>(i) * d;
            const double* ui = acts.u.data() + static_cast<std::size_t>(i) * f;

            // norm2 backward: dHout -> dS2 (g2 grad on the way)
            double m1 = 0, m2 = 0;
            double* ds2 = b.drow_d.data(); // scratch, length d
            for (int rr = 0; rr < d; ++rr) {
                const double dn2 = dhouti[rr] * g2[rr];
                g[lw.g2 + rr] += dhouti[rr] * n2i[rr];
                ds2[rr] = dn2;
                m1 += dn2;
                m2 += dn2 * n2i[rr];
            }
            m1 /= d;
            m2 /= d;
            const double is2 = acts.inv_sig2[i];
            for (int rr = 0; rr < d; ++rr)
                ds2[rr] = is2 * (ds2[rr] - m1 - n2i[rr] * m2);

            // residual split: dH1 += dS2, dFo = dS2
            double* dh1i = b.dh1.data() + static_cast<std::size_t>(i) * d;
            for (int rr = 0; rr < d; ++rr) dh1i[rr] += ds2[rr];

            // feed-forward backward
            double* du = b.drow_f.data();
            std::fill(du, du + f, 0.0);
            for (int rr = 0; rr < d; ++rr) {
                const double dfo = ds2[rr];
                g[lw.b2 + rr] += dfo;
                if (dfo == 0.0) continue;
                double* gw2 = g + lw.w2 + static_cast<std::size_t>(rr) * f;
                const double* w2 = w + lw.w2 + static_cast<std::size_t>(rr) * f;
#pragma omp simd
                for (int t = 0; t < f; ++t) {
                    gw2[t] += dfo * ui[t];
                    du[t] += w2[t] * dfo;
                }
            }
            for (int t = 0; t < f; ++t) {
                if (ui[t] <= 0.0) { du[t] = 0.0; continue; }
                g[lw.b1 + t] += du[t];
                double* gw1 = g + lw.w1 + static_cast<std::size_t>(t) * d;
                const double* w1 = w + lw.w1 + static_cast<std::size_t>(t) * d;
                const double dut = du[t];
#pragma omp simd
                for (int c = 0; c < d; ++c) {
                    gw1[c] += dut * h1i[c];
                    dh1i[c] += w1[c] * dut;
                }
            }

            // norm1 backward: dH1 -> dS1; dS1 feeds both dHin (residual) and dA
            double p1 = 0, p2 = 0;
            double* ds1 = b.drow_d.data();
            for (int rr = 0; rr < d; ++rr) {
                const double dn1 = dh1i[rr] * g1[rr];
                g[lw.g1 + rr] += dh1i[rr] * n1i[rr];
                ds1[rr] = dn1;
                p1 += dn1;
                p2 += dn1 * n1i[rr];
            }
            p1 /= d;
            p2 /= d;
            const double is1 = acts.inv_sig1[i];
            double* dai = b.da.data() + static_cast<std::size_t>(i) * d;
            for (int rr = 0; rr < d; ++rr) {
                const double v = is1 * (ds1[rr] - p1 - n1i[rr] * p2);
                dai[rr] = v; // dA
            }
        }

        // from here dh_out is reused as dHin accumulator for this layer
        std::fill(b.dh_out.begin(), b.dh_out.end(), 0.0);
        for (int i = 0; i < n; ++i) {
            const double* dai = b.da.data() + static_cast<std::size_t>(i) * d;
            double* dhini = b.dh_out.data() + static_cast<std::size_t>(i) * d;
            for (int rr = 0; rr < d; ++rr) dhini[rr] += dai[rr]; // residual path
        }

        // attention backward: dA -> Wo, dZ
        std::fill(b.dz.begin(), b.dz.end(), 0.0);
        for (int i = 0; i < n; ++i) {
            const double* dai = b.da.data() + static_cast<std::size_t>(i) * d;
            const double* zi = acts.z.data() + static_cast<std::size_t>(i) * d;
            double* dzi = b.dz.data() + static_cast<std::size_t>(i) * d;
            for (int rr = 0; rr < d; ++rr) {
                const double dr = dai[rr];
                if (dr == 0.0) continue;
                double* gw = g + lw.wo + static_cast<std::size_t>(rr) * d;
                const double* wo = w + lw.wo + static_cast<std::size_t>(rr) * d;
#pragma omp simd
                for (int c = 0; c < d; ++c) {
                    gw[c] += dr * zi[c];
                    dzi[c] += wo[c] * dr;
                }
            }
        }

        std::fill(b.dq.begin(), b.dq.end(), 0.0);
        std::fill(b.dk.begin(), b.dk.end(), 0.0);
        std::fill(b.dv.begin(), b.dv.end(), 0.0);
        for (int head = 0; head < h; ++head) {
            const int off = head * dk;
            for (int i = 0; i < n; ++i) {
                const double* prow = acts.p.data() +
                                     (static_cast<std::size_t>(head) * n + i) * n;
                const double* dzi = b.dz.data() + static_cast<std::size_t>(i) * d + off;
                // dP, then softmax-row backward into dS
                double dot = 0;
                for (int j = 0; j < n; ++j) {
                    const double* vj = acts.v.data() + static_cast<std::size_t>(j) * d + off;
                    double dpij = 0;
#pragma omp simd reduction(+ : dpij)
                    for (int c = 0; c < dk; ++c) dpij += dzi[c] * vj[c];
                    b.dp[j] = dpij;
                    dot += dpij * prow[j];
                    // dV accumulation
                    double* dvj = b.dv.data() + static_cast<std::size_t>(j) * d + off;
                    const double pij = prow[j];
                    for (int c = 0; c < dk; ++c) dvj[c] += pij * dzi[c];
                }
                double* dqi = b.dq.data() + static_cast<std::size_t>(i) * d + off;
                const double* qi = acts.q.data() + static_cast<std::size_t>(i) * d + off;
                for (int j = 0; j < n; ++j) {
                    const double dsij = prow[j] * (b.dp[j] - dot) * inv_sqrt_dk;
                    if (dsij == 0.0) continue;
                    const double* kj = acts.k.data() + static_cast<std::size_t>(j) * d + off;
                    double* dkj = b.dk.data() + static_cast<std::size_t>(j) * d + off;
                    for (int c = 0; c < dk; ++c) {
                        dqi[c] += dsij * kj[c];
                        dkj[c] += dsij * qi[c];
                    }
                }
            }
        }

        // projection backward: dQ/dK/dV -> Wq/Wk/Wv grads + dHin
        for (int i = 0; i < n; ++i) {
            const double* src = hin + static_cast<std::size_t>(i) * d;
            double* dhini = b.dh_out.data() + static_cast<std::size_t>(i) * d;
            const double* dqi = b.dq.data() + static_cast<std::size_t>(i) * d;
            const double* dki = b.dk.data() + static_cast<std::size_t>(i) * d;
            const double* dvi = b.dv.data() + static_cast<std::size_t>(i) * d;
            for (int rr = 0; rr < d; ++rr) {
                const double gq = dqi[rr], gk = dki[rr], gv = dvi[rr];
                double* gwq = g + lw.wq + static_cast<std::size_t>(rr) * d;
                double* gwk = g + lw.wk + static_cast<std::size_t>(rr) * d;
                double* gwv = g + lw.wv + static_cast<std::size_t>(rr) * d;
                const double* wq = w + lw.wq + static_cast<std::size_t>(rr) * d;
                const double* wk = w + lw.wk + static_cast<std::size_t>(rr) * d;
                const double* wv = w + lw.wv + static_cast<std::size_t>(rr) * d;
#pragma omp simd
                for (int c = 0; c < d; ++c) {
                    const double s = src[c];
                    gwq[c] += gq * s;
                    gwk[c] += gk * s;
                    gwv[c] += gv * s;
                    dhini[c] += wq[c] * gq + wk[c] * gk + wv[c] * gv;
                }
            }
        }
        // b.dh_out now holds dHin, which is dHout of the layer below
    }

    // input projection backward
    for (int i = 0; i < n; ++i) {
        const double* dhi = b.dh_out.data() + static_cast<std::size_t>(i) * d;
        const double* xi = b.x.data() + static_cast<std::size_t>(i) * F;
        for (int rr = 0; rr < d; ++rr) {
            const double dr = dhi[rr];
            g[b.layout.b_in + rr] += dr;
            if (dr == 0.0) continue;
            double* gw = g + b.layout.w_in + static_cast<std::size_t>(rr) * F;
            for (int c = 0; c < F; ++c) gw[c] += dr * xi[c];
        }
    }
}

double PolicyEvaluator::run_sequence(const Instance& inst, const CoverageKernel& kernel,
                                     const std::vector<int>* conditioning,
                                     const std::vector<int>* forced, DecodeMode mode, Rng* rng,
                                     double grad_scale, double* grad, Rollout* out) {
    const PolicyParams& params = *params_;
    if (!inst.colocated())
        throw std::invalid_argument("neural policy requires co-located customers and sites");
    const int n = inst.num_sites();

    int budget = 0;
    if (params.role == Role::Location) {
        if (conditioning != nullptr)
            throw std::invalid_argument("location role takes no conditioning plan");
        budget = inst.p;
    } else {
        if (conditioning == nullptr)
            throw std::invalid_argument("interdiction role requires a conditioning plan");
        validate_location(inst, LocationPlan{*conditioning});
        budget = inst.r;
    }
    if (forced != nullptr && static_cast<int>(forced->size()) != budget)
        throw std::invalid_argument("sequence length does not match the role budget");
    if (mode == DecodeMode::Sampled && forced == nullptr && rng == nullptr)
        throw std::invalid_argument("sampled rollout needs a random stream");

    Buffers& b = *buf_;
    b.ensure(params.dims, n);
    b.chosen.clear();

    double total_lp = 0.0;
    for (int step = 0; step < budget; ++step) {
        const StateFeatures sf =
            build_state_features(inst, kernel, params.role, b.chosen, conditioning);
        std::copy(sf.nodes.begin(), sf.nodes.end(), b.x.begin());
        b.ctx[params.dims.d + 0] = sf.globals[0];
        b.ctx[params.dims.d + 1] = sf.globals[1];

        if (params.role == Role::Location) {
            std::fill(b.feasible.begin(), b.feasible.end(), 1);
        } else {
            std::fill(b.feasible.begin(), b.feasible.end(), 0);
            for (int a : *conditioning) b.feasible[a] = 1;
        }
        for (int a : b.chosen) b.feasible[a] = 0;

        forward(n);

        int action = -1;
        if (forced != nullptr) {
            action = (*forced)[step];
            if (action < 0 || action >= n || !b.feasible[action])
                throw std::invalid_argument("infeasible action at step " + std::to_string(step));
        } else if (mode == DecodeMode::Greedy) {
            double best = -1.0;
            for (int j = 0; j < n; ++j) {
                if (b.feasible[j] && b.probs[j] > best) { best = b.probs[j]; action = j; }
            }
        } else {
            const double u = rng->uniform01();
            double cum = 0.0;
            for (int j = 0; j < n; ++j) {
                if (!b.feasible[j]) continue;
                cum += b.probs[j];
                action = j;
                if (u < cum) break;
            }
        }

        const double lp = std::log(b.probs[action]);
        total_lp += lp;
        if (out != nullptr) {
            out->actions.push_back(action);
            out->log_probs.push_back(lp);
        }
        if (grad != nullptr && grad_scale != 0.0) {
            for (int j = 0; j < n; ++j) {
                b.dp[j] = b.feasible[j]
                              ? grad_scale * ((j == action ? 1.0 : 0.0) - b.probs[j])
                              : 0.0;
            }
            backward(n, grad);
        }
        b.chosen.push_back(action);
    }
    return total_lp;
}

Rollout PolicyEvaluator::rollout(const Instance& inst, const CoverageKernel& kernel,
                                 const std::vector<int>* conditioning, DecodeMode mode,
                                 Rng* rng) {
    Rollout out;
    out.mode = mode;
    run_sequence(inst, kernel, conditioning, nullptr, mode, rng, 0.0, nullptr, &out);
    return out;
}

double PolicyEvaluator::log_prob_of(const Instance& inst, const CoverageKernel& kernel,
                                    const std::vector<int>* conditioning,
                                    const std::vector<int>& sequence) {
    return run_sequence(inst, kernel, conditioning, &sequence, DecodeMode::Greedy, nullptr, 0.0,
                        nullptr, nullptr);
}

double PolicyEvaluator::accumulate_log_prob_grad(const Instance& inst,
                                                 const CoverageKernel& kernel,
                                                 const std::vector<int>* conditioning,
                                                 const std::vector<int>& sequence, double scale,
                                                 std::span<double> grad) {
    if (grad.size() != params_->data.size())
        throw std::invalid_argument("gradient buffer size does not match params");
    return run_sequence(inst, kernel, conditioning, &sequence, DecodeMode::Greedy, nullptr, scale,
                        grad.data(), nullptr);
}

// --- convenience wrappers -----------------------------------------------------

EncodeResult encode_instance(const PolicyParams& params, const std::vector<double>& node_features,
                             int n) {
    if (node_features.size() != static_cast<std::size_t>(n) * PolicyDims::features)
        throw std::invalid_argument("feature matrix size does not match node count");
    EncodeResult res;
    res.n = n;

    // Standalone encoder pass for the single-call entry point; the hot
    // paths go through PolicyEvaluator instead.
    const PolicyDims& dims = params.dims;
    const ParamLayout layout(dims);
    const double* w = params.data.data();
    const int d = dims.d, h = dims.h, f = dims.f, L = dims.L;
    constexpr int F = PolicyDims::features;
    const int dk = d / h;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    std::vector<double> cur(static_cast<std::size_t>(n) * d);
    for (int i = 0; i < n; ++i) {
        const double* xi = node_features.data() + static_cast<std::size_t>(i) * F;
        double* hi = cur.data() + static_cast<std::size_t>(i) * d;
        for (int rr = 0; rr < d; ++rr) {
            const double* row = w + layout.w_in + static_cast<std::size_t>(rr) * F;
            double acc = w[layout.b_in + rr];
            for (int c = 0; c < F; ++c) acc += row[c] * xi[c];
            hi[rr] = acc;
        }
    }

    std::vector<double> q(cur.size()), k(cur.size()), v(cur.size()), z(cur.size());
    std::vector<double> prow(n), u(f), next(cur.size());
    for (int l = 0; l < L; ++l) {
        const auto& lw = layout.layers[l];
        for (int i = 0; i < n; ++i) {
            const double* src = cur.data() + static_cast<std::size_t>(i) * d;
            for (int rr = 0; rr < d; ++rr) {
                const double* wq = w + lw.wq + static_cast<std::size_t>(rr) * d;
                const double* wk = w + lw.wk + static_cast<std::size_t>(rr) * d;
                const double* wv = w + lw.wv + static_cast<std::size_t>(rr) * d;
                double aq = 0, ak = 0, av = 0;
                for (int c = 0; c < d; ++c) {
                    aq += wq[c] * src[c];
                    ak += wk[c] * src[c];
                    av += wv[c] * src[c];
                }
                q[static_cast<std::size_t>(i) * d + rr] = aq;
                k[static_cast<std::size_t>(i) * d + rr] = ak;
                v[static_cast<std::size_t>(i) * d + rr] = av;
            }
        }
        for (int head = 0; head < h; ++head) {
            const int off = head * dk;
            for (int i = 0; i < n; ++i) {
                const double* qi = q.data() + static_cast<std::size_t>(i) * d + off;
                double mx = -std::numeric_limits<double>::infinity();
                for (int j = 0; j < n; ++j) {
                    const double* kj = k.data() + static_cast<std::size_t>(j) * d + off;
                    double s = 0;
                    for (int c = 0; c < dk; ++c) s += qi[c] * kj[c];
                    prow[j] = s * inv_sqrt_dk;
                    mx = std::max(mx, prow[j]);
                }
                double denom = 0;
                for (int j = 0; j < n; ++j) {
                    prow[j] = std::exp(prow[j] - mx);
                    denom += prow[j];
                }
                double* zi = z.data() + static_cast<std::size_t>(i) * d + off;
                for (int c = 0; c < dk; ++c) zi[c] = 0;
                for (int j = 0; j < n; ++j) {
                    const double pij = prow[j] / denom;
                    const double* vj = v.data() + static_cast<std::size_t>(j) * d + off;
                    for (int c = 0; c < dk; ++c) zi[c] += pij * vj[c];
                }
            }
        }
        const double* g1 = w + lw.g1;
        const double* g2 = w + lw.g2;
        for (int i = 0; i < n; ++i) {
            const double* src = cur.data() + static_cast<std::size_t>(i) * d;
            const double* zi = z.data() + static_cast<std::size_t>(i) * d;
            double* dst = next.data() + static_cast<std::size_t>(i) * d;
            std::vector<double> s1(d), h1(d);
            double mean = 0;
            for (int rr = 0; rr < d; ++rr) {
                const double* wo = w + lw.wo + static_cast<std::size_t>(rr) * d;
                double acc = 0;
                for (int c = 0; c < d; ++c) acc += wo[c] * zi[c];
                s1[rr] = src[rr] + acc;
                mean += s1[rr];
            }
            mean /= d;
            double var = 0;
            for (int rr = 0; rr < d; ++rr) var += (s1[rr] - mean) * (s1[rr] - mean);
            var /= d;
            const double inv_sig = 1.0 / std::sqrt(var + kNormEps);
            for (int rr = 0; rr < d; ++rr) h1[rr] = (s1[rr] - mean) * inv_sig * g1[rr];

            for (int t = 0; t < f; ++t) {
                const double* w1 = w + lw.w1 + static_cast<std::size_t>(t) * d;
                double acc = w[lw.b1 + t];
                for (int c = 0; c < d; ++c) acc += w1[c] * h1[c];
                u[t] = acc > 0 ? acc : 0;
            }
            double mean2 = 0;
            std::vector<double> s2(d);
            for (int rr = 0; rr < d; ++rr) {
                const double* w2 = w + lw.w2 + static_cast<std::size_t>(rr) * f;
                double acc = w[lw.b2 + rr];
                for (int t = 0; t < f; ++t) acc += w2[t] * u[t];
                s2[rr] = h1[rr] + acc;
                mean2 += s2[rr];
            }
            mean2 /= d;
            double var2 = 0;
            for (int rr = 0; rr < d; ++rr) var2 += (s2[rr] - mean2) * (s2[rr] - mean2);
            var2 /= d;
            const double inv_sig2 = 1.0 / std::sqrt(var2 + kNormEps);
            for (int rr = 0; rr < d; ++rr) dst[rr] = (s2[rr] - mean2) * inv_sig2 * g2[rr];
        }
        std::swap(cur, next);
    }

    res.embeddings = cur;
    res.graph.assign(d, 0.0);
    for (int i = 0; i < n; ++i)
        for (int rr = 0; rr < d; ++rr) res.graph[rr] += cur[static_cast<std::size_t>(i) * d + rr];
    for (int rr = 0; rr < d; ++rr) res.graph[rr] /= n;
    return res;
}

std::vector<double> decode_action_distribution(const PolicyParams& params,
                                               const EncodeResult& enc,
                                               const std::array<double, 2>& globals,
                                               const std::vector<std::uint8_t>& mask) {
    const PolicyDims& dims = params.dims;
    const ParamLayout layout(dims);
    const double* w = params.data.data();
    const int d = dims.d, n = enc.n;
    constexpr int G = PolicyDims::globals;
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    if (static_cast<int>(mask.size()) != n)
        throw std::invalid_argument("mask size does not match node count");

    std::vector<double> ctx(d + G);
    std::copy(enc.graph.begin(), enc.graph.end(), ctx.begin());
    ctx[d] = globals[0];
    ctx[d + 1] = globals[1];

    std::vector<double> q(d);
    for (int rr = 0; rr < d; ++rr) {
        const double* wc = w + layout.w_ctx + static_cast<std::size_t>(rr) * (d + G);
        double acc = w[layout.b_ctx + rr];
        for (int c = 0; c < d + G; ++c) acc += wc[c] * ctx[c];
        q[rr] = acc;
    }

    std::vector<double> logits(n);
    for (int j = 0; j < n; ++j) {
        const double* hj = enc.embeddings.data() + static_cast<std::size_t>(j) * d;
        double s = 0;
        for (int rr = 0; rr < d; ++rr) {
            const double* wo = w + layout.w_out + static_cast<std::size_t>(rr) * d;
            double acc = 0;
            for (int c = 0; c < d; ++c) acc += wo[c] * hj[c];
            s += q[rr] * acc;
        }
        logits[j] = kLogitClip * std::tanh(s * inv_sqrt_d);
    }

    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j)
        if (mask[j]) mx = std::max(mx, logits[j]);
    if (mx == -std::numeric_limits<double>::infinity())
        throw std::invalid_argument("no feasible action");
    std::vector<double> probs(n, 0.0);
    double denom = 0;
    for (int j = 0; j < n; ++j) {
        if (!mask[j]) continue;
        probs[j] = std::exp(logits[j] - mx);
        denom += probs[j];
    }
    for (int j = 0; j < n; ++j) probs[j] /= denom;
    return probs;
}

} // namespace mclip
