"""Command-line front end: every sweep writes a deterministic CSV or JSON table."""

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from attlab import protocol as proto
from attlab.asymptotics import limit_distributions, shifted_convergence
from attlab.capacities import cea_pure_loss, coherent_info_with_budget
from attlab.errors import AttlabError, InvariantViolation, UsageError
from attlab.fock import bosonic_entropy_g as g, moments, shannon_entropy
from attlab.search import FINE_STEP, default_lambda_grid, k_of_n_fit, nbar_search

DEFAULTS = {
    "icoh-sweep": {"N": [0.5], "n": [3, 5, 10, 20, 50, 100], "lam": [round(0.02 * i, 12) for i in range(51)]},
    "nbar": {"N": [0.25, 0.5, 1.0, 2.0], "lam": None, "n_cap": 5000, "step": 0.005},
    "entropy-gap": {"N": [0.25, 0.5, 1.0, 2.0, 4.0], "c_rule": ["N+2", "N", "1", "0.01"]},
    "prob-convergence": {"N": [2.0], "c": [3.0], "n": [25, 50, 100, 200, 400]},
    "protocol": {"n": [2], "lam": [0.4], "k": [3], "nu": [0.0], "delta_t": [0.0], "t_E": 1.0, "shape": "linear"},
    "appendix-b": {"lam": [0.002], "N": [0.5], "n": [100]},
    "appendix-c": {"nu": [0.0, 0.5, 1.0, 2.0], "lam": [0.1, 0.05, 0.02]},
    "fiber": {"length": [15.0], "lam": None},
}


def fmt(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def render(columns, rows, kind):
    if kind == "json":
        def val(x):
            if x is None or (isinstance(x, float) and not math.isfinite(x)):
                return "null"
            if isinstance(x, (int, float)) and not isinstance(x, bool):
                return fmt(x)
            return json.dumps(fmt(x))

        objs = ["{" + ", ".join(f'"{c}": {val(r.get(c))}' for c in columns) + "}" for r in rows]
        return "[\n" + ",\n".join("  " + o for o in objs) + "\n]\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def pmap(fn, items, jobs):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


# --- workers (module level so they pickle) ---

def _icoh_row(args):
    N, n, lam = args
    val, budget = coherent_info_with_budget(N, n, lam)
    return {"N": N, "n": n, "lam": lam, "icoh_bits": val, "error_budget": budget}


def _nbar_row(args):
    N, lam, n_cap = args
    rec = nbar_search(N, lam, n_cap)
    budget = coherent_info_with_budget(N, rec.n_bar, lam)[1] if rec.found else None
    return {
        "N": N, "lam": lam, "n_bar": rec.n_bar, "n_cap": n_cap,
        "icoh_at_nbar": rec.icoh_at_nbar if rec.found else None,
        "icoh_before": None if math.isnan(rec.icoh_before) else rec.icoh_before,
        "error_budget": budget,
    }


def _c_value(rule, N):
    if rule == "N+2":
        return N + 2
    if rule == "N":
        return N
    return float(rule)


def _gap_row(args):
    N, rule = args
    c = _c_value(rule, N)
    ld = limit_distributions(N, c)
    hq, hp = shannon_entropy(ld.q), shannon_entropy(ld.p)
    return {
        "N": N, "c_rule": rule, "c": c, "H_q": hq, "H_p": hp, "gap": hq - hp,
        "q_tail": ld.q.tail_mass, "p_tail": ld.p.tail_mass,
    }


def _conv_row(args):
    N, c, n = args
    dq, dp = shifted_convergence(N, n, c)
    ld = limit_distributions(N, c)
    return {"N": N, "c": c, "n": n, "dist_q": dq, "dist_p": dp, "limit_tail": max(ld.tails())}


def _sigma0(nu):
    return proto.Sigma0.thermal(nu) if nu > 0 else proto.Sigma0.vacuum()


def _protocol_row(args):
    n, lam, k, nu, dt, t_E, shape, exact = args
    s0 = _sigma0(nu)
    plan = proto.TriggerPlan(n, lam, k, s0, dt, proto.ThermalizationModel(t_E, shape))
    m0 = s0.moments()
    closed = proto.env_moments(n, lam, k, m0)
    row = {
        "n": n, "lam": lam, "k": k, "nu": nu, "delta_t": dt,
        "mean_closed": closed.mean_photon, "var_closed": closed.photon_variance,
        "moment_bound": proto.fock_distance_bound(closed, n),
        "eta_bound": proto.fock_distance_eta(n, m0) * lam ** (k / 2),
        "k0_bound": 2 * proto.k0_constant(m0) * math.sqrt(lam) if k == 2 and n == proto.n_lambda(lam) else None,
    }
    if exact:
        env = proto.env_after_triggers(plan)
        m = moments(env)
        row.update(
            mean_exact=m.mean_photon, var_exact=m.photon_variance,
            exact_distance=proto.distance_to_fock(env, n), tail=env.tail_mass,
        )
        if dt > 0:
            row["relax_shift"] = proto.relaxation_shift(plan, env)
    return row


def _single_trigger_row(args):
    lam, N, n = args
    env, z = proto.single_trigger_binomial(n, lam, N)
    c = cea_pure_loss(lam, N)
    return {"lam": lam, "N": N, "n": n, "z": z, "cea_pure_loss": c, "ratio": z / c, "tail": env.tail_mass}


def _one_trigger_row(args):
    nu, lams = args
    row = {"nu": nu, "limit_distance": proto.one_trigger_limit_distance(nu)}
    for lam in lams:
        row[f"dist_lam_{lam!r}"] = proto.one_trigger_finite_distance(nu, lam)
    return row


def fiber_lambda(length_km, gamma=0.2):
    """Transmissivity of a fiber with attenuation gamma dB/km."""
    if length_km < 0 or gamma < 0:
        raise UsageError("length and gamma must be non-negative")
    return 10 ** (-gamma * length_km / 10)


def fiber_length(lam, gamma=0.2):
    if not 0 < lam <= 1 or gamma <= 0:
        raise UsageError("need 0 < lam <= 1 and gamma > 0")
    return -10 * math.log10(lam) / gamma


# --- commands ---

def _product(*lists):
    out = [()]
    for lst in lists:
        out = [o + (x,) for o in out for x in lst]
    return out


def _require(cond, msg):
    if not cond:
        raise UsageError(msg)


def cmd_icoh_sweep(o, jobs):
    _require(o["N"] and o["n"] and o["lam"], "empty grid")
    _require(all(0 <= x <= 1 for x in o["lam"]), "lam must lie in [0, 1]")
    _require(all(N > 0 for N in o["N"]) and all(int(n) >= 0 for n in o["n"]), "need N > 0 and n >= 0")
    items = sorted(_product(o["N"], [int(n) for n in o["n"]], o["lam"]))
    return ["N", "n", "lam", "icoh_bits", "error_budget"], pmap(_icoh_row, items, jobs)


def cmd_nbar(o, jobs):
    lam = o["lam"] or default_lambda_grid(FINE_STEP if o.get("fine_step") else o["step"])
    _require(o["N"] and lam, "empty grid")
    rows = pmap(_nbar_row, sorted(_product(o["N"], lam, [int(o["n_cap"])])), jobs)
    for N in sorted(set(o["N"])):
        sub = [r for r in rows if r["N"] == N]
        fit = (None, None)
        if len(sub) >= 8 and all(0 < r["lam"] <= 0.1 for r in sub) and any(r["n_bar"] is not None for r in sub):
            fit = k_of_n_fit(N, [r["lam"] for r in sub], [r["n_bar"] for r in sub])
        for r in sub:
            r["K_fit"], r["K_residual"] = fit
    cols = ["N", "lam", "n_bar", "n_cap", "icoh_at_nbar", "icoh_before", "error_budget", "K_fit", "K_residual"]
    return cols, rows


def cmd_entropy_gap(o, jobs):
    _require(o["N"] and o["c_rule"], "empty grid")
    for rule in o["c_rule"]:
        if rule not in ("N+2", "N"):
            try:
                _require(float(rule) >= 0, "c must be non-negative")
            except ValueError:
                raise UsageError(f"unknown c rule {rule!r}") from None
    items = sorted(_product(o["N"], o["c_rule"]))
    return ["N", "c_rule", "c", "H_q", "H_p", "gap", "q_tail", "p_tail"], pmap(_gap_row, items, jobs)


def cmd_prob_convergence(o, jobs):
    items = sorted(_product(o["N"], o["c"], [int(n) for n in o["n"]]))
    return ["N", "c", "n", "dist_q", "dist_p", "limit_tail"], pmap(_conv_row, items, jobs)


def cmd_protocol(o, jobs):
    items = sorted(_product([int(x) for x in o["n"]], o["lam"], [int(x) for x in o["k"]], o["nu"], o["delta_t"]))
    exact = not o.get("no_exact")
    rows = pmap(_protocol_row, [i + (o["t_E"], o["shape"], exact) for i in items], jobs)
    cols = ["n", "lam", "k", "nu", "delta_t", "mean_closed", "var_closed"]
    if exact:
        cols += ["mean_exact", "var_exact", "exact_distance", "tail"]
        if any(x > 0 for x in o["delta_t"]):
            cols.append("relax_shift")
    return cols + ["moment_bound", "eta_bound", "k0_bound"], rows


def cmd_single_trigger(o, jobs):
    items = sorted(_product(o["lam"], o["N"], [int(n) for n in o["n"]]))
    return ["lam", "N", "n", "z", "cea_pure_loss", "ratio", "tail"], pmap(_single_trigger_row, items, jobs)


def cmd_one_trigger(o, jobs):
    lams = tuple(o["lam"])
    rows = pmap(_one_trigger_row, [(nu, lams) for nu in sorted(o["nu"])], jobs)
    return ["nu", "limit_distance"] + [f"dist_lam_{x!r}" for x in lams], rows


def cmd_fiber(o, jobs):
    gamma = o["gamma"]
    rows = []
    if o["lam"]:
        for lam in sorted(o["lam"]):
            rows.append({"gamma": gamma, "length_km": fiber_length(lam, gamma), "lam": lam, "error_budget": 0.0})
    else:
        for L in sorted(o["length"]):
            rows.append({"gamma": gamma, "length_km": L, "lam": fiber_lambda(L, gamma), "error_budget": 0.0})
    return ["gamma", "length_km", "lam", "error_budget"], rows


def cmd_selftest(o, jobs):
    from attlab.selftest import run_checks

    rows = run_checks()
    bad = [r for r in rows if not r["passed"]]
    return ["check", "value", "op", "limit", "passed"], rows, bad


COMMANDS = {
    "icoh-sweep": cmd_icoh_sweep,
    "nbar": cmd_nbar,
    "entropy-gap": cmd_entropy_gap,
    "prob-convergence": cmd_prob_convergence,
    "protocol": cmd_protocol,
    "appendix-b": cmd_single_trigger,
    "appendix-c": cmd_one_trigger,
    "fiber": cmd_fiber,
    "selftest": cmd_selftest,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="attlab", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of option values; flags override it")
    common.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    common.add_argument("--format", choices=["csv", "json"], default=None)
    common.add_argument("--output", "-o", default=None, help="write here instead of stdout")
    sub = ap.add_subparsers(dest="command", required=True)

    def floats(p, name, help_):
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float, nargs="+", default=None, help=help_)

    def ints(p, name, help_):
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=int, nargs="+", default=None, help=help_)

    p = sub.add_parser("icoh-sweep", parents=[common], help="coherent information on a (N, n, lam) grid")
    floats(p, "N", "thermal input photon numbers")
    ints(p, "n", "environment Fock numbers")
    floats(p, "lam", "transmissivities in [0, 1]")

    p = sub.add_parser("nbar", parents=[common], help="threshold n_bar(N, lam) and the K(N) fit")
    floats(p, "N", "thermal input photon numbers")
    floats(p, "lam", "explicit lam grid (default: 0.01..0.1)")
    p.add_argument("--n-cap", dest="n_cap", type=int, default=None)
    p.add_argument("--step", type=float, default=None, help="grid step of the default lam grid")
    p.add_argument("--fine-step", dest="fine_step", action="store_true", help=f"use step {FINE_STEP}")

    p = sub.add_parser("entropy-gap", parents=[common], help="H(q) - H(p) of the limit laws")
    floats(p, "N", "N values")
    p.add_argument("--c-rule", dest="c_rule", nargs="+", default=None, help="'N+2', 'N' or a number")

    p = sub.add_parser("prob-convergence", parents=[common], help="l1 distance of finite-n laws from the limits")
    floats(p, "N", "N values")
    floats(p, "c", "c values")
    ints(p, "n", "Fock numbers n >= c")

    p = sub.add_parser("protocol", parents=[common], help="trigger protocol: moments, exact distance, bounds")
    ints(p, "n", "photons per trigger state")
    floats(p, "lam", "transmissivities in (0, 1)")
    ints(p, "k", "trigger counts")
    floats(p, "nu", "thermal sigma0 photon number (0 = vacuum)")
    floats(p, "delta_t", "delays between signals")
    p.add_argument("--t-E", dest="t_E", type=float, default=None, help="environment reset time")
    p.add_argument("--shape", choices=["linear", "exponential"], default=None)
    p.add_argument("--no-exact", dest="no_exact", action="store_true", help="closed-form moments only")

    p = sub.add_parser("appendix-b", parents=[common], help="single-trigger rate versus pure loss")
    floats(p, "lam", "transmissivities")
    floats(p, "N", "input photon numbers")
    ints(p, "n", "trigger photons")

    p = sub.add_parser("appendix-c", parents=[common], help="one-trigger distance in the small-lam limit")
    floats(p, "nu", "thermal photon numbers")
    floats(p, "lam", "finite lam values for the convergence check")

    p = sub.add_parser("fiber", parents=[common], help="fiber length <-> transmissivity")
    floats(p, "length", "lengths in km")
    floats(p, "lam", "transmissivities (converted to lengths)")
    p.add_argument("--gamma", type=float, default=None, help="attenuation in dB/km (default 0.2)")

    sub.add_parser("selftest", parents=[common], help="run the invariant suite")
    return ap


def resolve(args):
    opts = dict(DEFAULTS.get(args.command, {}))
    opts.setdefault("gamma", 0.2)
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
        opts.update(cfg)
    for key, val in vars(args).items():
        if val is not None and val is not False and key not in ("command", "config"):
            opts[key] = val
    opts["format"] = opts.get("format") or "csv"
    return opts


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        opts = resolve(args)
        jobs = opts.get("jobs") or os.cpu_count() or 1
        result = COMMANDS[args.command](opts, jobs)
        bad = result[2] if len(result) == 3 else []
        text = render(result[0], result[1], opts["format"])
        if opts.get("output"):
            with open(opts["output"], "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        if bad:
            raise InvariantViolation(f"{len(bad)} selftest checks failed")
    except AttlabError as exc:
        print(f"attlab: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, TypeError, KeyError) as exc:
        print(f"attlab: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
