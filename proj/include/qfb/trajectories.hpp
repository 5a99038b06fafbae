#pragma once

#include "qfb/generators.hpp"

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <random>
#include <span>
#include <thread>
#include <vector>

namespace qfb {

struct TrajectoryConfig {
    double dt = 1e-3;
    double t_end = 1.0;
    std::int64_t n_traj = 1000;
    std::uint64_t seed = 0;
    bool record_jumps = false;
    int threads = 0;  // 0: QFB_THREADS or hardware concurrency
    std::vector<double> p_values{1.0, 2.0};
    std::vector<double> sample_times;  // t_end is always sampled last
    double current_weight = 1.0;       // diffusive schemes: Z accumulates weight * sum_z dy_z
};

struct JumpRecord {
    std::int64_t trajectory = 0;
    double t = 0.0;
    int channel = 0;
    double n_running = 0.0;
};

struct TrajectoryStats {
    std::int64_t n = 0;
    double mean = 0.0;
    double variance = 0.0;  // unbiased
    std::map<double, double> p_norms;
    std::vector<double> per_channel_counts;  // mean count per channel
    std::vector<double> values;  // N(t_end) or Z(t_end) per trajectory

    std::vector<double> sample_times;
    std::vector<double> sample_means;
    std::vector<double> sample_stderr;
    std::vector<Operator> mean_states;  // ensemble-averaged state at each sample time
    std::vector<JumpRecord> records;

    double precision() const { return variance / (mean * mean); }
    double precision_stderr() const;
};

/// Default worker count: QFB_THREADS if set, otherwise the hardware concurrency.
inline int default_threads() {
    if (const char* env = std::getenv("QFB_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

inline double pairwise_sum(std::span<const double> x) {
    if (x.size() <= 16) {
        double s = 0.0;
        for (const double v : x) s += v;
        return s;
    }
    const std::size_t h = x.size() / 2;
    return pairwise_sum(x.first(h)) + pairwise_sum(x.subspan(h));
}

inline double sample_mean(std::span<const double> x) { return pairwise_sum(x) / static_cast<double>(x.size()); }

inline double sample_variance(std::span<const double> x) {
    const double m = sample_mean(x);
    std::vector<double> d(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = (x[i] - m) * (x[i] - m);
    return pairwise_sum(d) / static_cast<double>(x.size() - 1);
}

/// <|x|^p>^{1/p}
inline double p_norm(std::span<const double> x, double p) {
    std::vector<double> a(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) a[i] = std::pow(std::abs(x[i]), p);
    return std::pow(sample_mean(a), 1.0 / p);
}

// Delta-method standard error of a statistic given its per-sample influence values.
inline double influence_stderr(std::span<const double> inf) {
    return std::sqrt(sample_variance(inf) / static_cast<double>(inf.size()));
}

inline double TrajectoryStats::precision_stderr() const {
    const double m = mean, v = variance;
    std::vector<double> inf(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double c = values[i] - m;
        inf[i] = (c * c - v) / (m * m) - 2.0 * v * c / (m * m * m);
    }
    return influence_stderr(inf);
}

/// Standard error of ||x||_p / ||x||_1.
inline double p_norm_ratio_stderr(std::span<const double> x, double p) {
    std::vector<double> ap(x.size()), a1(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        a1[i] = std::abs(x[i]);
        ap[i] = std::pow(a1[i], p);
    }
    const double mp = sample_mean(ap), m1 = sample_mean(a1);
    const double r = std::pow(mp, 1.0 / p) / m1;
    std::vector<double> inf(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) inf[i] = r * ((ap[i] - mp) / (p * mp) - (a1[i] - m1) / m1);
    return influence_stderr(inf);
}

/// Sum_z nu_z Tr[L_z rho L_z^dag]: the instantaneous mean counting rate.
inline double dN_dtau(const OpenSystem& sys, std::span<const double> nu, const DensityMatrix& rho) {
    if (nu.size() != sys.channels()) throw DimensionError("dN_dtau: weight count differs from channel count");
    double r = 0.0;
    for (std::size_t z = 0; z < sys.channels(); ++z)
        r += nu[z] * trace_product(sys.jumps[z].adjoint() * sys.jumps[z], rho.op()).real();
    return r;
}

inline double dN_dtau(const OpenSystem& sys, const JumpFB& fb, const DensityMatrix& rho) {
    return dN_dtau(sys, std::span<const double>(fb.nu), rho);
}

namespace detail {

/// xoshiro256** (Blackman and Vigna), seeded through splitmix64. Cheap to seed per trajectory.
class Xoshiro256 {
  public:
    using result_type = std::uint64_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    explicit Xoshiro256(std::uint64_t seed) {
        for (auto& w : s_) w = splitmix(seed);
    }

    result_type operator()() {
        const std::uint64_t r = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return r;
    }

    /// Uniform double in [0, 1) from the top 53 bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    static std::uint64_t splitmix(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

/// Independent stream for trajectory `index` of a run seeded with `seed`.
inline Xoshiro256 trajectory_rng(std::uint64_t seed, std::int64_t index) {
    std::uint64_t x = seed;
    const std::uint64_t a = Xoshiro256::splitmix(x);
    return Xoshiro256(a ^ (static_cast<std::uint64_t>(index) * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
}

struct StepPlan {
    Index n_steps = 0;
    double dt = 0.0;
    std::vector<Index> sample_steps;
    std::vector<double> sample_times;
};

inline StepPlan plan_steps(const TrajectoryConfig& cfg, double max_rate) {
    if (cfg.n_traj < 2) throw InputError("trajectories: need at least 2 trajectories for a variance");
    if (!(cfg.dt > 0.0) || !(cfg.t_end > 0.0)) throw InputError("trajectories: dt and t_end must be positive");
    StepPlan plan;
    plan.n_steps = std::max<Index>(1, static_cast<Index>(std::llround(cfg.t_end / cfg.dt)));
    plan.dt = cfg.t_end / static_cast<double>(plan.n_steps);
    const double load = plan.dt * max_rate;
    if (load > 0.2) throw InputError("trajectories: dt too large for the jump rates (dt * rate > 0.2)");
    if (load > 0.05) warning_sink()("trajectories: dt * rate exceeds 0.05");
    for (const double t : cfg.sample_times) {
        if (t < 0.0 || t > cfg.t_end) throw InputError("trajectories: sample time outside [0, t_end]");
        plan.sample_steps.push_back(static_cast<Index>(std::llround(t / plan.dt)));
    }
    plan.sample_steps.push_back(plan.n_steps);
    for (const Index k : plan.sample_steps) plan.sample_times.push_back(static_cast<double>(k) * plan.dt);
    return plan;
}

inline double max_jump_rate(const std::vector<Operator>& jumps, Index d) {
    Operator s = Operator::Zero(d, d);
    for (const auto& L : jumps) s += L.adjoint() * L;
    if (jumps.empty()) return 0.0;
    Eigen::SelfAdjointEigenSolver<Operator> es(hermitize(s), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

// Mixture decomposition of rho0 used to draw initial pure states.
struct InitialEnsemble {
    std::vector<double> cumulative;
    std::vector<CVector> states;

    explicit InitialEnsemble(const DensityMatrix& rho0) {
        Eigen::SelfAdjointEigenSolver<Operator> es(rho0.op());
        double acc = 0.0;
        for (Index k = 0; k < rho0.dim(); ++k) {
            const double w = std::max(0.0, es.eigenvalues()(k));
            if (w <= 1e-14) continue;
            acc += w;
            cumulative.push_back(acc);
            states.push_back(es.eigenvectors().col(k));
        }
        for (auto& c : cumulative) c /= acc;
        cumulative.back() = 1.0;
    }

    const CVector& draw(Xoshiro256& rng) const {
        const double u = rng.uniform();
        std::size_t k = 0;
        while (k + 1 < cumulative.size() && u >= cumulative[k]) ++k;
        return states[k];
    }
};

template <int D>
struct Kernel {
    using Vec = Eigen::Matrix<cplx, D, 1>;
    using Mat = Eigen::Matrix<cplx, D, D>;
};

// Per-chunk partial sums, merged in chunk order for thread-count independence.
struct ChunkSums {
    std::vector<Operator> states;
};

inline constexpr std::int64_t kChunk = 256;

struct EnsembleResult {
    std::vector<std::vector<double>> sampled;  // [sample][trajectory]
    std::vector<std::vector<double>> channel_counts;  // [channel][trajectory]
    std::vector<Operator> mean_states;
    std::vector<JumpRecord> records;
};

/// Runs body(traj_index, rng, chunk_sums, records_out) over all trajectories in fixed chunks.
template <class Body>
EnsembleResult run_chunks(const TrajectoryConfig& cfg, Index d, std::size_t n_samples, std::size_t n_channels,
                          Body&& body) {
    const std::int64_t n = cfg.n_traj;
    const std::int64_t n_chunks = (n + kChunk - 1) / kChunk;
    EnsembleResult res;
    res.sampled.assign(n_samples, std::vector<double>(static_cast<std::size_t>(n)));
    res.channel_counts.assign(n_channels, std::vector<double>(static_cast<std::size_t>(n)));
    std::vector<ChunkSums> sums(static_cast<std::size_t>(n_chunks));
    std::vector<std::vector<JumpRecord>> recs(cfg.record_jumps ? static_cast<std::size_t>(n) : 0);

    std::atomic<std::int64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        try {
            for (;;) {
                const std::int64_t c = next.fetch_add(1);
                if (c >= n_chunks) return;
                ChunkSums& cs = sums[static_cast<std::size_t>(c)];
                cs.states.assign(n_samples, Operator::Zero(d, d));
                const std::int64_t end = std::min(n, (c + 1) * kChunk);
                for (std::int64_t t = c * kChunk; t < end; ++t) {
                    auto rng = trajectory_rng(cfg.seed, t);
                    body(t, rng, res, cs, cfg.record_jumps ? &recs[static_cast<std::size_t>(t)] : nullptr);
                }
            }
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next.store(n_chunks);
        }
    };
    const int nt = std::max(1, std::min<int>(cfg.threads > 0 ? cfg.threads : default_threads(),
                                             static_cast<int>(n_chunks)));
    if (nt == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int k = 0; k < nt; ++k) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    res.mean_states.assign(n_samples, Operator::Zero(d, d));
    for (const auto& cs : sums)
        for (std::size_t s = 0; s < n_samples; ++s) res.mean_states[s] += cs.states[s];
    for (auto& m : res.mean_states) m /= static_cast<double>(n);
    for (auto& r : recs) res.records.insert(res.records.end(), r.begin(), r.end());
    return res;
}

inline TrajectoryStats summarize(const TrajectoryConfig& cfg, const StepPlan& plan, EnsembleResult res) {
    TrajectoryStats st;
    st.n = cfg.n_traj;
    st.values = std::move(res.sampled.back());
    st.mean = sample_mean(st.values);
    st.variance = sample_variance(st.values);
    for (const double p : cfg.p_values) {
        if (!(p >= 1.0)) throw InputError("trajectories: p-norm order must be >= 1");
        st.p_norms[p] = p_norm(st.values, p);
    }
    for (const auto& c : res.channel_counts) st.per_channel_counts.push_back(sample_mean(c));
    st.sample_times = plan.sample_times;
    res.sampled.back() = st.values;
    for (const auto& s : res.sampled) {
        st.sample_means.push_back(sample_mean(s));
        st.sample_stderr.push_back(std::sqrt(sample_variance(s) / static_cast<double>(s.size())));
    }
    st.mean_states = std::move(res.mean_states);
    st.records = std::move(res.records);
    return st;
}

template <int D>
TrajectoryStats jump_engine(const OpenSystem& sys, const JumpFB& fb, const DensityMatrix& rho0,
                            const TrajectoryConfig& cfg) {
    using Vec = typename Kernel<D>::Vec;
    using Mat = typename Kernel<D>::Mat;
    const Index d = sys.dim();
    const std::size_t nc = sys.channels();
    const StepPlan plan = plan_steps(cfg, max_jump_rate(sys.jumps, d));
    const double dt = plan.dt;

    const Operator UH = expm(Operator(cplx(0, -dt) * sys.H));
    Operator LdL = Operator::Zero(d, d);
    for (const auto& L : sys.jumps) LdL += L.adjoint() * L;
    const Mat A0 = UH * (identity(d) - 0.5 * dt * LdL);
    std::vector<Mat> Ls, Post;
    for (std::size_t z = 0; z < nc; ++z) {
        Ls.push_back(sys.jumps[z]);
        Post.push_back(UH * feedback_unitary(fb.F[z], fb.nu[z]));
    }
    const InitialEnsemble init(rho0);

    auto body = [&](std::int64_t traj, Xoshiro256& rng, EnsembleResult& res, ChunkSums& cs,
                    std::vector<JumpRecord>* rec) {
        Vec psi = init.draw(rng);
        std::vector<Vec> lpsi(nc);
        std::vector<double> p(nc);
        std::vector<double> counts(nc, 0.0);
        double N = 0.0;
        std::size_t si = 0;
        auto sample = [&](Index step) {
            while (si < plan.sample_steps.size() && plan.sample_steps[si] == step) {
                res.sampled[si][static_cast<std::size_t>(traj)] = N;
                cs.states[si] += Operator(psi * psi.adjoint());
                ++si;
            }
        };
        sample(0);
        for (Index k = 1; k <= plan.n_steps; ++k) {
            double ptot = 0.0;
            for (std::size_t z = 0; z < nc; ++z) {
                lpsi[z] = Ls[z] * psi;
                p[z] = dt * lpsi[z].squaredNorm();
                ptot += p[z];
            }
            if (ptot > 1.0) throw NumericalError("jump trajectory: negative no-jump probability");
            const double u = rng.uniform();
            if (u < ptot) {
                std::size_t z = 0;
                double acc = p[0];
                while (z + 1 < nc && u >= acc) acc += p[++z];
                psi = Post[z] * lpsi[z];
                N += fb.nu[z];
                counts[z] += 1.0;
                if (rec) rec->push_back({traj, static_cast<double>(k) * dt, static_cast<int>(z), N});
            } else {
                psi = A0 * psi;
            }
            const double nrm = psi.norm();
            if (!(nrm > 0.0) || !std::isfinite(nrm)) throw NumericalError("jump trajectory: state norm lost");
            psi /= nrm;
            sample(k);
        }
        for (std::size_t z = 0; z < nc; ++z) res.channel_counts[z][static_cast<std::size_t>(traj)] = counts[z];
    };
    auto res = run_chunks(cfg, d, plan.sample_steps.size(), nc, body);
    return summarize(cfg, plan, std::move(res));
}

template <int D>
TrajectoryStats diffusive_engine(const OpenSystem& sys, const HomodyneFB& fb, const DensityMatrix& rho0,
                                 const TrajectoryConfig& cfg) {
    using Vec = typename Kernel<D>::Vec;
    using Mat = typename Kernel<D>::Mat;
    const Index d = sys.dim();
    const std::size_t nc = sys.channels();
    const StepPlan plan = plan_steps(cfg, max_jump_rate(sys.jumps, d));
    const double dt = plan.dt;
    const double sqdt = std::sqrt(dt);

    const Mat UH = expm(Operator(cplx(0, -dt) * sys.H));
    std::vector<Mat> c(nc);
    Operator CdC = Operator::Zero(d, d);
    for (std::size_t z = 0; z < nc; ++z) {
        const Operator cz = std::exp(cplx(0, -fb.phi[z])) * sys.jumps[z];
        c[z] = cz;
        CdC += cz.adjoint() * cz;
    }
    const Mat drift = -0.5 * dt * CdC;
    std::vector<Mat> cc(nc * nc);
    for (std::size_t a = 0; a < nc; ++a)
        for (std::size_t b = 0; b < nc; ++b) cc[a * nc + b] = c[a] * c[b];
    Eigen::SelfAdjointEigenSolver<Operator> fes(hermitize(fb.F));
    const Mat V = fes.eigenvectors();
    const Mat Vd = V.adjoint();
    const Eigen::VectorXd fev = fes.eigenvalues();
    const InitialEnsemble init(rho0);

    auto body = [&](std::int64_t traj, Xoshiro256& rng, EnsembleResult& res, ChunkSums& cs,
                    std::vector<JumpRecord>*) {
        std::normal_distribution<double> gauss(0.0, 1.0);
        Vec psi = init.draw(rng);
        std::vector<Vec> cpsi(nc);
        std::vector<double> dy(nc);
        double Z = 0.0;
        std::size_t si = 0;
        auto sample = [&](Index step) {
            while (si < plan.sample_steps.size() && plan.sample_steps[si] == step) {
                res.sampled[si][static_cast<std::size_t>(traj)] = Z;
                cs.states[si] += Operator(psi * psi.adjoint());
                ++si;
            }
        };
        sample(0);
        for (Index k = 1; k <= plan.n_steps; ++k) {
            double theta = 0.0;
            for (std::size_t z = 0; z < nc; ++z) {
                cpsi[z] = c[z] * psi;
                const double x = 2.0 * psi.dot(cpsi[z]).real();
                dy[z] = x * dt + sqdt * gauss(rng);
                theta += dy[z];
            }
            Vec next = psi + drift * psi;
            for (std::size_t a = 0; a < nc; ++a) {
                next += dy[a] * cpsi[a];
                for (std::size_t b = 0; b < nc; ++b) {
                    const double w = dy[a] * dy[b] - (a == b ? dt : 0.0);
                    next += (0.5 * w) * (cc[a * nc + b] * psi);
                }
            }
            Vec rot = Vd * next;
            for (Index i = 0; i < d; ++i) rot(i) *= std::polar(1.0, -fev(i) * theta);
            psi = UH * (V * rot);
            const double nrm = psi.norm();
            if (!(nrm > 0.0) || !std::isfinite(nrm)) throw NumericalError("diffusive trajectory: state norm lost");
            psi /= nrm;
            Z += cfg.current_weight * theta;
            sample(k);
        }
    };
    auto res = run_chunks(cfg, d, plan.sample_steps.size(), 0, body);
    return summarize(cfg, plan, std::move(res));
}

template <template <int> class Engine, class... Args>
TrajectoryStats dispatch_dim(Index d, Args&&... args) {
    switch (d) {
        case 2: return Engine<2>::run(std::forward<Args>(args)...);
        case 4: return Engine<4>::run(std::forward<Args>(args)...);
        default: return Engine<Eigen::Dynamic>::run(std::forward<Args>(args)...);
    }
}

template <int D>
struct JumpEngine {
    template <class... A>
    static TrajectoryStats run(A&&... a) { return jump_engine<D>(std::forward<A>(a)...); }
};

template <int D>
struct DiffusiveEngine {
    template <class... A>
    static TrajectoryStats run(A&&... a) { return diffusive_engine<D>(std::forward<A>(a)...); }
};

}  // namespace detail

/// Jump unraveling with per-jump feedback. N counts nu-weighted jumps.
inline TrajectoryStats run_jump_ensemble(const OpenSystem& sys, const JumpFB& fb, const DensityMatrix& rho0,
                                         const TrajectoryConfig& cfg) {
    sys.validate();
    validate(sys, fb);
    if (rho0.dim() != sys.dim()) throw DimensionError("run_jump_ensemble: state dimension mismatch");
    return detail::dispatch_dim<detail::JumpEngine>(sys.dim(), sys, fb, rho0, cfg);
}

inline TrajectoryStats run_jump_ensemble(const OpenSystem& sys, const DensityMatrix& rho0,
                                         const TrajectoryConfig& cfg) {
    JumpFB fb{std::vector<double>(sys.channels(), 1.0),
              std::vector<Operator>(sys.channels(), Operator::Zero(sys.dim(), sys.dim()))};
    return run_jump_ensemble(sys, fb, rho0, cfg);
}

/// Diffusive unraveling with Markovian current feedback. Z integrates the summed channel currents.
inline TrajectoryStats run_homodyne_ensemble(const OpenSystem& sys, const HomodyneFB& fb, const DensityMatrix& rho0,
                                             const TrajectoryConfig& cfg) {
    sys.validate();
    validate(sys, fb);
    if (rho0.dim() != sys.dim()) throw DimensionError("run_homodyne_ensemble: state dimension mismatch");
    return detail::dispatch_dim<detail::DiffusiveEngine>(sys.dim(), sys, fb, rho0, cfg);
}

/// Gaussian measurement of Y, run as homodyne with L = sqrt(lambda) Y, phi = 0, F -> F / (2 sqrt(lambda)).
inline TrajectoryStats run_gaussian_ensemble(const OpenSystem& sysH, const GaussianFB& fb, const DensityMatrix& rho0,
                                             const TrajectoryConfig& cfg) {
    validate(sysH, FeedbackScheme(fb));
    const double s = std::sqrt(fb.lambda);
    const OpenSystem hom = make_system(sysH.H, {s * fb.Y}, {"Y"});
    TrajectoryConfig c = cfg;
    c.current_weight = cfg.current_weight / (2.0 * s);
    return run_homodyne_ensemble(hom, HomodyneFB{{0.0}, fb.F / (2.0 * s)}, rho0, c);
}

}  // namespace qfb
