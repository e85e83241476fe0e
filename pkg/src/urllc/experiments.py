"""Registry of reproducible experiments; each returns a :class:`CsvTable`."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import codes, dependability, evt, fbl, largescale, queueing, raresim, tails
from ._rng import generator, substreams
from .errors import UrllcError

DEFAULT_SEED = 1


class UsageError(UrllcError, ValueError):
    """Bad experiment name or parameter."""


@dataclass
class CsvTable:
    header: list[str]
    rows: list[list[float]]
    footer: list[str] = field(default_factory=list)

    def __post_init__(self):
        if any(len(r) != len(self.header) for r in self.rows):
            raise ValueError("rows must match the header width")

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(",".join(self.header) + "\n")
        for row in self.rows:
            out.write(",".join(_fmt(v) for v in row) + "\n")
        for line in self.footer:
            out.write(f"# {line}\n")
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CsvTable":
        lines = text.splitlines()
        header = lines[0].split(",")
        rows, footer = [], []
        for line in lines[1:]:
            if line.startswith("#"):
                footer.append(line[2:])
            elif line:
                rows.append([_parse(t) for t in line.split(",")])
        return cls(header, rows, footer)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def _parse(tok: str):
    try:
        return int(tok)
    except ValueError:
        return float(tok)


@dataclass(frozen=True)
class Experiment:
    name: str
    reproduces: str
    defaults: dict
    fn: Callable[[dict, int], CsvTable]


REGISTRY: dict[str, Experiment] = {}


def _experiment(name: str, reproduces: str, **defaults):
    def deco(fn):
        REGISTRY[name] = Experiment(name, reproduces, defaults, fn)
        return fn
    return deco


def _grid(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


# ---------------------------------------------------------------- experiments

@_experiment("mdo-margin", "MDO fade margin vs outage target", burst_duration=2e-4, doppler=93.33,
             log10_xi_min=-7.0, log10_xi_max=-3.0, log10_xi_step=0.5)
def _mdo(p, seed):
    rows = []
    for e in _grid(p["log10_xi_min"], p["log10_xi_max"], p["log10_xi_step"]):
        xi = float(10.0 ** round(e, 10))
        root, closed = dependability.mdo_margin(
            dependability.MdoProblem(xi, p["burst_duration"], p["doppler"]))
        rows.append([xi, dependability.to_db(root), dependability.to_db(closed),
                     dependability.to_db(dependability.outage_only_margin(xi))])
    return CsvTable(["xi", "F_star_db", "F_closed_db", "F_outage_db"], rows)


_SINR_SCENARIOS = {
    0: [-10.0],
    1: [-20.0 + 5 * k for k in range(1, 5)],
    2: [-20.0 + 4 * k for k in range(1, 7)],
    3: [-21.0 + 3 * k for k in range(1, 10)],
}


@_experiment("sinr-tail", "SINR outage CDF: exact, tail approximation, Monte Carlo", gamma0_db=10.0, th_db_min=-20.0, th_db_max=10.0,
             th_db_step=1.0, draws=100_000)
def _sinr(p, seed):
    rows = []
    g0 = dependability.from_db(p["gamma0_db"])
    th = dependability.from_db(_grid(p["th_db_min"], p["th_db_max"], p["th_db_step"]))
    for (idx, bars_db), rng in zip(_SINR_SCENARIOS.items(), substreams(seed, 4)):
        bars = dependability.from_db(np.asarray(bars_db))
        net = tails.SinrNetwork(g0, tuple(bars))
        n = p["draws"]
        sig = g0 * rng.exponential(size=n)
        intf = (bars * rng.exponential(size=(n, len(bars)))).sum(axis=1)
        sinr = np.sort(sig / (1 + intf))
        mc = np.searchsorted(sinr, th, side="left") / n
        ex = tails.sinr_outage_exact(net, th)
        ap = tails.sinr_outage_tail_approx(net, th)
        rows += [[idx, dependability.to_db(t), e, a, m] for t, e, a, m in zip(th, ex, ap, mc)]
    return CsvTable(["scenario", "gamma_th_db", "cdf_exact", "cdf_asinr", "cdf_mc"], rows,
                    ["scenario: 0=A 1=B 2=C 3=D"])


@_experiment("precoder-markov", "Markov-inequality precoder power and outage", M=4, k_factor_db=-10.0, gamma_th=1.0, xi=1e-3,
             snr_db=10.0, L_list="8,16,32,64,128,256", realizations=20, candidates=2000,
             fresh_draws=100_000)
def _precoder_markov(p, seed):
    noise = 1 / dependability.from_db(p["snr_db"])
    K = dependability.from_db(p["k_factor_db"])
    rows = []
    for L in (int(v) for v in p["L_list"].split(",")):
        outs, pows = [], []
        for rng in substreams(seed + L, p["realizations"]):
            angle = rng.uniform(-math.pi / 2, math.pi / 2)
            hist = tails.rician_history(p["M"], L, K, rng, noise, angle)
            w = tails.min_power_markov_beamformer(hist, p["gamma_th"], p["xi"], p["candidates"], rng)
            fresh = tails.rician_history(p["M"], p["fresh_draws"], K, rng, noise, angle)
            outs.append(tails.empirical_outage(fresh.entries, w, noise, p["gamma_th"]))
            pows.append(dependability.to_db(float(np.vdot(w, w).real)))
        rows.append([L, float(np.mean(outs)), float(np.quantile(outs, 0.25)),
                     float(np.quantile(outs, 0.75)), float(np.mean(pows))])
    return CsvTable(["L", "outage_mean", "outage_q25", "outage_q75", "power_db_mean"], rows)


@_experiment("precoder-evt", "EVT precoder vs Markov precoder", M=8, k_factor_db=0.0, gamma_th=1.0, snr_db=10.0,
             log10_xi_list="-3,-3.5", ci_level=0.95, realizations=3, candidates=4, directions=2000,
             fresh_draws=200_000)
def _precoder_evt(p, seed):
    noise = 1 / dependability.from_db(p["snr_db"])
    K = dependability.from_db(p["k_factor_db"])
    rows = []
    for i, e in enumerate(float(v) for v in p["log10_xi_list"].split(",")):
        xi = 10.0**e
        L = math.ceil(1 / xi)
        exc = math.sqrt(xi)  # threshold at the (1 - sqrt(xi))-quantile
        res = {"evt": ([], []), "markov": ([], [])}
        for rng in substreams(seed + 1000 * i, p["realizations"]):
            angle = rng.uniform(-math.pi / 2, math.pi / 2)
            hist = tails.rician_history(p["M"], L, K, rng, noise, angle)
            fresh = tails.rician_history(p["M"], p["fresh_draws"], K, rng, noise, angle)
            dirs, power = tails.markov_ranked_directions(hist, p["gamma_th"], xi,
                                                         p["directions"], rng)
            w_m = dirs[0] * math.sqrt(power[0])
            w_e = evt.min_power_evt_beamformer(hist, p["gamma_th"], xi, exc, p["ci_level"],
                                               directions=dirs[: p["candidates"]],
                                               transform=lambda x: x)
            for key, w in (("evt", w_e), ("markov", w_m)):
                if w is None:
                    continue
                res[key][0].append(tails.empirical_outage(fresh.entries, w, noise, p["gamma_th"]))
                res[key][1].append(dependability.to_db(float(np.vdot(w, w).real)))
        row = [xi, L, exc]
        for key in ("evt", "markov"):
            o, pw = res[key]
            row += [float(np.mean(o)) if o else math.nan, float(np.mean(pw)) if pw else math.nan,
                    len(o)]
        rows.append(row)
    return CsvTable(["xi", "L", "exceedance_fraction", "evt_outage_mean", "evt_power_db_mean",
                     "evt_certified", "markov_outage_mean", "markov_power_db_mean",
                     "markov_certified"], rows)


@_experiment("raresim-compare", "MRC outage: closed form, CMC, subset simulation", r=1.0, d_list="2,4,8,16", snr_db_min=0.0,
             snr_db_max=30.0, snr_db_step=10.0, cmc_samples=100_000, ss_samples=10_000, q=0.1,
             max_levels=100, thinning=5)
def _raresim(p, seed):
    rows = []
    for d in (int(v) for v in p["d_list"].split(",")):
        for g_db in _grid(p["snr_db_min"], p["snr_db_max"], p["snr_db_step"]):
            g = dependability.from_db(g_db)
            ev = raresim.mrc_outage_event(d, g, p["r"])
            cf = raresim.mrc_outage_closed_form(d, g, p["r"])
            s = seed + 1000 * d + int(round(g_db))
            cmc = raresim.cmc_estimate(ev, p["cmc_samples"], s)
            ss = raresim.subset_simulation(ev, p["ss_samples"], p["q"], s, p["max_levels"],
                                           p["thinning"])
            rows.append([d, g_db, cf, cmc.p_hat, ss.p_hat, ss.cov, ss.samples_used])
    return CsvTable(["d", "snr_db", "closed_form", "cmc", "subset", "subset_cov",
                     "subset_samples"], rows)


@_experiment("fbl-rate", "finite-blocklength rate vs blocklength", snr_db_list="0,10,20", eps_list="1e-3,1e-5,1e-7",
             N_list="10,20,50,100,200,500,1000,2000,5000,10000")
def _fbl_rate(p, seed):
    rows = []
    for g_db in (float(v) for v in p["snr_db_list"].split(",")):
        g = dependability.from_db(g_db)
        C, _ = fbl.awgn_capacity_dispersion(g)
        for eps in (float(v) for v in p["eps_list"].split(",")):
            for N in (int(v) for v in p["N_list"].split(",")):
                r = fbl.max_rate(N, eps, g)
                rows.append([g_db, eps, N, r.rate, C, r.rate / C, r.clipped])
    return CsvTable(["snr_db", "eps", "N", "rate", "capacity", "normalized", "clipped"], rows)


@_experiment("fbl-fading", "average error under Rician fading", N=100, mean_snr_db=10.0, los_list="0,1,10,100",
             log2k_max=9)
def _fbl_fading(p, seed):
    g = dependability.from_db(p["mean_snr_db"])
    rows = []
    for K in (float(v) for v in p["los_list"].split(",")):
        spec = fbl.FadingSpec("rician" if K > 0 else "rayleigh", g, K)
        for j in range(p["log2k_max"] + 1):
            k = 2**j
            rows.append([K, j, fbl.avg_error_fading(spec, k, p["N"]),
                         fbl.avg_error_fading(spec, k, p["N"], "asymptotic_outage")])
    return CsvTable(["los_factor", "log2_k", "avg_error", "asymptotic_outage"], rows)


@_experiment("fbl-penalty", "finite-blocklength SNR penalty vs rate", N_list="100,1000", eps_list="1e-2,1e-6", r_min=0.25,
             r_max=8.0, r_step=0.25)
def _fbl_penalty(p, seed):
    rows = []
    for N in (int(v) for v in p["N_list"].split(",")):
        for eps in (float(v) for v in p["eps_list"].split(",")):
            for r in _grid(p["r_min"], p["r_max"], p["r_step"]):
                d, d0 = fbl.snr_penalty(float(r), N, eps)
                rows.append([N, eps, r, d, d0])
    return CsvTable(["N", "eps", "rate", "delta", "delta0"], rows)


@_experiment("polar-bler", "polar SC BLER vs normal approximation", codes="128:32,128:64", modulation="QPSK", snr_db_min=-4.0,
             snr_db_max=4.0, snr_db_step=1.0, trials=2000, design_param=0.5)
def _polar(p, seed):
    rows = []
    for spec in p["codes"].split(","):
        N, K = (int(v) for v in spec.split(":"))
        code = codes.polar_construct(N, K, p["design_param"])
        for s in _grid(p["snr_db_min"], p["snr_db_max"], p["snr_db_step"]):
            est = codes.polar_bler_sim(code, s, p["modulation"], p["trials"],
                                       seed + 7919 * N + 104729 * K + int(round(10 * s)))
            rows.append([N, K, s, est.bler, est.errors, est.trials,
                         codes.fbl_reference_bler(code, s, p["modulation"])])
    return CsvTable(["N", "K", "snr_db", "bler", "errors", "trials", "fbl_reference"], rows,
                    [f"modulation={p['modulation']}"])


@_experiment("grand-ml", "GRAND block error and query count on a BSC", n=12, k=6, p_list="0.01,0.05,0.1", trials=1000)
def _grand(p, seed):
    rng = generator(seed)
    book = codes.random_linear_code(p["n"], p["k"], rng)
    cw = book.codewords()
    rows = []
    for crossover in (float(v) for v in p["p_list"].split(",")):
        order = codes.NoiseQueryOrder(p["n"], crossover)
        errors, queries = 0, 0
        for _ in range(p["trials"]):
            c = cw[rng.integers(len(cw))]
            y = c ^ (rng.random(p["n"]) < crossover).astype(np.uint8)
            res = codes.grand_decode(book, y, order)
            errors += int(res.codeword is None or np.any(res.codeword != c))
            queries += res.queries
        rows.append([crossover, p["trials"], errors / p["trials"], queries / p["trials"]])
    return CsvTable(["crossover", "trials", "block_error_rate", "mean_queries"], rows)


@_experiment("effcap-tradeoff", "availability-latency-power trade-off", C_e=0.2, N=100, r=0.5, symbol_period=35.7e-6,
             rho_db_min=0.0, rho_db_max=50.0, rho_db_step=2.0, delta_min=20, delta_max=2000,
             delta_step=20)
def _effcap(p, seed):
    rhos = dependability.from_db(_grid(p["rho_db_min"], p["rho_db_max"], p["rho_db_step"]))
    deltas = np.arange(p["delta_min"], p["delta_max"] + 1, p["delta_step"])
    pts = queueing.availability_latency_power(p["C_e"], p["N"], p["r"], rhos, deltas)
    code = {"ok": 0, "saturated": 1, "infeasible": 2}
    rows = [[dependability.to_db(t.rho), t.delta_max, 1e3 * t.delta_max * p["symbol_period"],
             t.theta, t.availability, code[t.status]] for t in pts]
    return CsvTable(["rho_db", "delta_max", "latency_ms", "theta", "availability", "status"],
                    rows, ["status: 0=ok 1=saturated 2=infeasible"])


@_experiment("aoi-survival", "LCFS age survival function", rates="1:1,3:3,3:5", t_max=5.0, t_step=0.1)
def _aoi(p, seed):
    rows = []
    for pair in p["rates"].split(","):
        lam, mu = (float(v) for v in pair.split(":"))
        for t in _grid(0.0, p["t_max"], p["t_step"]):
            rows.append([lam, mu, t, queueing.age_survival_lcfs(lam, mu, float(t))])
    return CsvTable(["lambda", "mu", "t", "survival"], rows)


@_experiment("metadist", "SIR meta-distribution of a Poisson field", density_list="1e-5,1e-7", gamma_th_db=-10.0, r0=80.0,
             alpha=4.0, xi_list="0.5,0.2,0.1,0.05,0.02,0.01,0.005,0.002,0.001",
             realizations=20_000)
def _metadist(p, seed):
    rows = []
    g = dependability.from_db(p["gamma_th_db"])
    for i, lam in enumerate(float(v) for v in p["density_list"].split(",")):
        for j, xi in enumerate(float(v) for v in p["xi_list"].split(",")):
            q = largescale.MetaDistQuery(lam, g, p["r0"], p["alpha"], xi)
            closed = largescale.metadist_closed_form_alpha4(q) if p["alpha"] == 4 else math.nan
            mc = largescale.metadist_mc(q, p["realizations"], seed=seed + 100 * i + j)
            rows.append([lam, xi, closed, mc.estimate, mc.std_error])
    return CsvTable(["lambda", "xi", "p_m_closed", "p_m_mc", "se"], rows)


@_experiment("schedule", "K-medoids vs random access scheduling", N_list="16,32,64,128", L=8, baseline_seeds=100)
def _schedule(p, seed):
    rows = []
    for N in (int(v) for v in p["N_list"].split(",")):
        A = largescale.ActivationMatrix.harmonic(N)
        km = largescale.collision_probability(A, largescale.kmedoids_schedule(A, p["L"], seed))[1]
        base = [largescale.collision_probability(A, largescale.random_allocation(N, p["L"], rng))[1]
                for rng in substreams(seed + N, p["baseline_seeds"])]
        rows.append([N, km, float(np.mean(base)), float(np.std(base))])
    return CsvTable(["N", "kmedoids", "random_mean", "random_std"], rows)


@_experiment("amp-detect", "AMP activity-detection error vs threshold", tau_p=48, M=64, N=200, snr_db=20.0, eps=0.05, trials=50,
             iterations=30, psi_min=0.0, psi_max=10.0, psi_step=0.5)
def _amp(p, seed):
    psis = _grid(p["psi_min"], p["psi_max"], p["psi_step"])
    err = np.zeros(len(psis))
    known = 0.0
    g = dependability.from_db(p["snr_db"])
    for rng in substreams(seed, p["trials"]):
        prob, active, _ = largescale.simulate_activity(p["tau_p"], p["M"], p["N"], g, p["eps"], rng)
        norms = largescale.amp_norms(prob, p["iterations"])
        err += [np.mean((norms >= s) != active) for s in psis]
        det = largescale.amp_detect_known_sparsity(prob, p["iterations"], int(active.sum()))
        known += float(np.mean(det != active))
    k = known / p["trials"]
    return CsvTable(["psi", "error_rate", "known_sparsity_error"],
                    [[s, e / p["trials"], k] for s, e in zip(psis, err)])


@_experiment("metadata-success", "success probability with metadata errors", mbb_data_error=0.1, urllc_data_error=1e-3,
             metadata_error=1e-3, feedback_error=1e-3)
def _metadata(p, seed):
    rows = []
    for idx, ped in ((0, p["mbb_data_error"]), (1, p["urllc_data_error"])):
        for n in (0, 1):
            rows.append([idx, n,
                         fbl.success_with_metadata(p["metadata_error"], ped, p["feedback_error"], n),
                         fbl.success_with_metadata(0.0, ped, 0.0, n)])
    return CsvTable(["service", "n", "with_metadata", "metadata_neglected"], rows,
                    ["service: 0=MBB 1=URLLC"])


@_experiment("peak-aoi", "peak age of information by queue model", lam=0.5, mu=1.0)
def _peak_aoi(p, seed):
    rows = []
    for idx, kind in enumerate(queueing.AOI_KINDS):
        m = queueing.AoiModel(kind, p["lam"], p["mu"])
        rows.append([idx, p["lam"], p["mu"], queueing.peak_aoi(m)])
    legend = " ".join(f"{i}={k}" for i, k in enumerate(queueing.AOI_KINDS))
    return CsvTable(["model", "lambda", "mu", "peak_aoi"], rows, [f"model: {legend}"])


# ---------------------------------------------------------------- plumbing

def list_experiments() -> list[tuple[str, str]]:
    return sorted((e.name, e.reproduces) for e in REGISTRY.values())


def _coerce(key: str, value, default):
    if isinstance(value, str) and not isinstance(default, str):
        try:
            if isinstance(default, bool):
                return value.lower() in ("1", "true", "yes")
            if isinstance(default, int):
                return int(value)
            return float(value)
        except ValueError:
            raise UsageError(f"parameter {key!r} expects {type(default).__name__}") from None
    if isinstance(default, float) and isinstance(value, int):
        return float(value)
    if isinstance(default, str) and not isinstance(value, str):
        return str(value)
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    overrides: dict = field(default_factory=dict)
    seed: int = DEFAULT_SEED
    out: str | None = None

    def params(self) -> dict:
        if self.experiment not in REGISTRY:
            raise UsageError(f"unknown experiment {self.experiment!r}")
        defaults = REGISTRY[self.experiment].defaults
        unknown = set(self.overrides) - set(defaults)
        if unknown:
            raise UsageError(f"unknown parameter(s) for {self.experiment}: {sorted(unknown)}")
        merged = dict(defaults)
        for k, v in self.overrides.items():
            merged[k] = _coerce(k, v, defaults[k])
        return merged


def run(cfg: ExperimentConfig) -> CsvTable:
    from . import __version__

    params = cfg.params()
    if not 0 <= cfg.seed < 2**64:
        raise UsageError("seed must be an unsigned 64-bit integer")
    table = REGISTRY[cfg.experiment].fn(params, cfg.seed)
    table.footer = [f"experiment={cfg.experiment} seed={cfg.seed} version={__version__}",
                    *table.footer]
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(table.to_csv())
    return table
