"""Command-line interface.

File formats (all plain text, see README for byte-level examples):

  data CSV      n rows x p columns, comma separated, no header
  labels CSV    one integer component label per line, p lines
  spec JSON     mixture description, one object per component
  estimate JSON {"weights": [...], "means": [[column 0], [column 1], ...],
                 "trace": [{"cost", "rel_dw", "rel_da"}, ...], ...};
                 means are column-major: means[j] is component j over the
                 n coordinates
  moments JSON  {"g": name, "values": column-major matrix, "floored": bool}
  report JSON   error percentages and the matched permutation
  scan CSV      header r,cost,iterations,converged

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numerical
failure. All outputs are written atomically (temp file + rename).
"""

from __future__ import annotations

import functools
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import click
import numpy as np

from .als import solve_mean_and_weight
from .alsplus import fit_als_plus
from .bench import format_table, run_bench
from .errors import ConfigError, MixmomError, NumericalError
from .general_means import (
    EntrywiseFunction,
    solve_general_mean,
    solve_second_moment_floored,
)
from .hyper import FitOptions, validate_tau
from .metrics import match_and_score, rank_scan, sample_reference
from .models import (
    PROTOCOLS,
    MixtureSpec,
    gen_poisson_image_protocol,
    sample_mixture,
    synth_smooth_images,
)


def _fail(code, message):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def cli_errors(fn):
    """Map exception classes onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            _fail(2, exc)
        except NumericalError as exc:
            _fail(4, exc)
        except MixmomError as exc:
            _fail(4, exc)
        except json.JSONDecodeError as exc:
            _fail(3, f"malformed JSON: {exc}")
        except OSError as exc:
            _fail(3, exc)
        except ValueError as exc:
            _fail(3, f"malformed input: {exc}")

    return wrapper


def atomic_write(path, text):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    atomic_write(path, json.dumps(obj, indent=1) + "\n")


def write_csv_matrix(path, M):
    buf = io.StringIO()
    np.savetxt(buf, np.asarray(M), delimiter=",", fmt="%.17g")
    atomic_write(path, buf.getvalue())


def read_data(path):
    V = np.loadtxt(path, delimiter=",", ndmin=2)
    if V.size == 0:
        raise ConfigError(f"no data rows in {path}")
    return V


def read_labels(path):
    labels = np.loadtxt(path, delimiter=",", dtype=int, ndmin=1)
    return labels.ravel()


def estimate_to_json(result, r, d, seed):
    est = result.estimate
    return {
        "weights": [float(x) for x in est.weights],
        "means": [[float(x) for x in est.means[:, j]] for j in range(est.means.shape[1])],
        "trace": [
            {"cost": c, "rel_dw": dw, "rel_da": da}
            for c, (dw, da) in zip(result.cost_trace, result.change_trace)
        ],
        "converged": bool(result.state.converged),
        "iterations": int(result.state.iterations),
        "r": int(r),
        "d": int(d),
        "seed": int(seed),
    }


def load_estimate(path):
    with open(path) as fh:
        obj = json.load(fh)
    try:
        weights = np.asarray(obj["weights"], dtype=float)
        means = np.asarray(obj["means"], dtype=float).T
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed estimate JSON: {exc}") from exc
    if means.ndim != 2 or means.shape[1] != weights.size:
        raise ConfigError("estimate JSON has inconsistent weights/means shapes")
    return weights, means, obj


def _parse_tau(text, d):
    try:
        values = [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"cannot parse --tau {text!r}") from exc
    return validate_tau(values, d)


def _parse_ranks(text):
    text = text.strip()
    if ":" in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",")]


@click.group()
def main():
    """Implicit method-of-moments estimation for mixture models."""


@main.command()
@click.option("--protocol", type=click.Choice(sorted(PROTOCOLS) + ["poisson-image"]))
@click.option("--spec", "spec_path", type=click.Path(exists=False), help="Mixture spec JSON (alternative to --protocol).")
@click.option("-n", "n", type=int, default=None, help="Number of coordinates.")
@click.option("-r", "r", type=int, default=None, help="Number of components.")
@click.option("-p", "p", type=int, required=True, help="Sample size.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--images", "images_path", type=click.Path(), default=None, help="CSV of r x n nonnegative rates (poisson-image).")
@click.option("--image-side", type=int, default=None, help="Synthesize smooth rate images of this side length (poisson-image).")
@click.option("--out-dir", type=click.Path(file_okay=False), default=".", show_default=True)
@cli_errors
def generate(protocol, spec_path, n, r, p, seed, images_path, image_side, out_dir):
    """Sample a synthetic mixture: writes data.csv, labels.csv, spec.json."""
    if (protocol is None) == (spec_path is None):
        raise ConfigError("pass exactly one of --protocol or --spec")
    if spec_path is not None:
        spec = MixtureSpec.load(spec_path)
    elif protocol == "poisson-image":
        if r is None:
            raise ConfigError("--protocol poisson-image needs -r")
        if images_path is not None:
            images = read_data(images_path)
        elif image_side is not None:
            images = synth_smooth_images(image_side, r, seed)
        else:
            raise ConfigError("poisson-image needs --images or --image-side")
        spec = gen_poisson_image_protocol(images, seed)
    else:
        if n is None or r is None:
            raise ConfigError(f"--protocol {protocol} needs -n and -r")
        spec = PROTOCOLS[protocol](n, r, seed)
    V, labels = sample_mixture(spec, p, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv_matrix(out / "data.csv", V)
    atomic_write(out / "labels.csv", "\n".join(str(int(x)) for x in labels) + "\n")
    atomic_write(out / "spec.json", json.dumps(spec.to_json(), indent=1) + "\n")
    click.echo(f"wrote {out / 'data.csv'} ({V.shape[0]} x {V.shape[1]}), labels, spec")


@main.command()
@click.option("--data", "data_path", type=click.Path(), required=True)
@click.option("-r", "r", type=int, required=True)
@click.option("-d", "d", type=int, required=True)
@click.option("--tau", "tau_text", default=None, help="Comma-separated order weights, length d.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--xtol", type=float, default=1e-4, show_default=True)
@click.option("--max-iter", type=int, default=200, show_default=True)
@click.option("--warmup-steps", type=int, default=20, show_default=True)
@click.option("--block-size", type=int, default=2, show_default=True)
@click.option("--weight-floor", type=float, default=0.1, show_default=True)
@click.option("--aa-depth", type=int, default=15, show_default=True)
@click.option("--aa-eps", type=float, default=1e-4, show_default=True)
@click.option("--no-aa", is_flag=True, help="Disable Anderson extrapolation.")
@click.option("--no-drop-one", is_flag=True, help="Disable the drop-one safeguard.")
@click.option("--basic", is_flag=True, help="Plain alternation, no warm-up stage.")
@click.option("--strict", is_flag=True, help="Exit 4 if the fit does not converge.")
@click.option("--out", "out_path", type=click.Path(), default="estimate.json", show_default=True)
@cli_errors
def fit(data_path, r, d, tau_text, seed, xtol, max_iter, warmup_steps, block_size,
        weight_floor, aa_depth, aa_eps, no_aa, no_drop_one, basic, strict, out_path):
    """Fit weights and componentwise means to a data CSV."""
    V = read_data(data_path)
    tau = None if tau_text is None else _parse_tau(tau_text, d)
    options = FitOptions(
        xtol=xtol, max_iter=max_iter, warmup_steps=warmup_steps,
        block_size=block_size, weight_floor=weight_floor, aa_depth=aa_depth,
        aa_eps=aa_eps, aa_enabled=not no_aa, drop_one=not no_drop_one,
        seed=seed, tau=tau,
    )
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if basic:
            result = solve_mean_and_weight(V, r, d, options=options)
        else:
            result = fit_als_plus(V, r, d, options=options)
    write_json(out_path, estimate_to_json(result, r, d, seed))
    status = "converged" if result.state.converged else "not converged"
    click.echo(
        f"fit {status} after {result.state.iterations} iterations; wrote {out_path}"
    )
    if strict and not result.state.converged:
        _fail(4, f"fit did not converge within {max_iter} iterations")


@main.command("general-means")
@click.option("--data", "data_path", type=click.Path(), required=True)
@click.option("--estimate", "estimate_path", type=click.Path(), required=True)
@click.option("-d", "d", type=int, required=True)
@click.option("--g", "g_name", default="square", show_default=True,
              help="identity, square, power:<s>, log, indicator:<thr>.")
@click.option("--floored", is_flag=True,
              help="Floor implied variances (g must be square).")
@click.option("--tau", "tau_text", default=None)
@click.option("--out", "out_path", type=click.Path(), default="moments.json", show_default=True)
@cli_errors
def general_means(data_path, estimate_path, d, g_name, floored, tau_text, out_path):
    """Solve componentwise means of transformed data at a fitted estimate."""
    V = read_data(data_path)
    weights, means, _ = load_estimate(estimate_path)
    tau = None if tau_text is None else _parse_tau(tau_text, d)
    if floored:
        if g_name != "square":
            raise ConfigError("--floored applies to --g square only")
        Y = solve_second_moment_floored(V, weights, means, d, tau=tau)
    else:
        g = EntrywiseFunction.from_name(g_name)
        Y = solve_general_mean(g, V, weights, means, d, tau=tau)
    write_json(
        out_path,
        {
            "g": g_name,
            "floored": bool(floored),
            "values": [[float(x) for x in Y[:, j]] for j in range(Y.shape[1])],
        },
    )
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--data", "data_path", type=click.Path(), required=True)
@click.option("--labels", "labels_path", type=click.Path(), required=True)
@click.option("--estimate", "estimate_path", type=click.Path(), required=True)
@click.option("--moments", "moments_path", type=click.Path(), default=None,
              help="Moments JSON from general-means to score as well.")
@click.option("--out", "out_path", type=click.Path(), default="report.json", show_default=True)
@cli_errors
def evaluate(data_path, labels_path, estimate_path, moments_path, out_path):
    """Score an estimate against label-conditional sample references."""
    V = read_data(data_path)
    labels = read_labels(labels_path)
    weights, means, _ = load_estimate(estimate_path)
    r = weights.size
    w_ref = np.bincount(labels, minlength=r) / labels.size
    if w_ref.size != r:
        raise ConfigError(
            f"labels name {w_ref.size} components but the estimate has {r}"
        )
    A_ref = sample_reference(V, labels, r=r)
    moments = None
    if moments_path is not None:
        with open(moments_path) as fh:
            obj = json.load(fh)
        try:
            g_name = obj["g"]
            Y = np.asarray(obj["values"], dtype=float).T
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed moments JSON: {exc}") from exc
        g = EntrywiseFunction.from_name(g_name)
        ref = sample_reference(V, labels, g=g, r=r)
        moments = {g_name: (Y, ref)}
    report = match_and_score(weights, means, w_ref, A_ref, moments=moments)
    write_json(out_path, report.to_json())
    summary = f"weight {report.weight_error:.3f}%  mean {report.mean_error:.3f}%"
    for key, val in report.moment_errors.items():
        summary += f"  {key} {val:.3f}%"
    click.echo(summary + f"; wrote {out_path}")


@main.command("rank-scan")
@click.option("--data", "data_path", type=click.Path(), required=True)
@click.option("--ranks", required=True, help="Comma list (3,4,5) or inclusive range (3:7).")
@click.option("-d", "d", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--cost-tol", type=float, default=1e-6, show_default=True,
              help="Stop a fit when relative cost improvement drops below this.")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default="scan.csv", show_default=True)
@cli_errors
def rank_scan_cmd(data_path, ranks, d, seed, cost_tol, jobs, out_path):
    """Fit a range of component counts and tabulate final costs."""
    V = read_data(data_path)
    options = FitOptions(seed=seed)
    rows = rank_scan(V, _parse_ranks(ranks), d, options=options,
                     cost_tol=cost_tol, jobs=jobs)
    lines = ["r,cost,iterations,converged"]
    for row in rows:
        lines.append(
            f"{row['r']},{row['cost']:.17g},{row['iterations']},{int(row['converged'])}"
        )
    atomic_write(out_path, "\n".join(lines) + "\n")
    click.echo("\n".join(lines))


@main.command()
@click.option("-n", type=int, default=30, show_default=True)
@click.option("-r", type=int, default=5, show_default=True)
@click.option("-p", type=int, default=20000, show_default=True)
@click.option("-d", type=int, default=4, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Also write the table as CSV.")
@cli_errors
def bench(n, r, p, d, out_path):
    """Time the solver phases on every available kernel backend."""
    rows = run_bench(n=n, r=r, p=p, d=d)
    click.echo(format_table(rows))
    if out_path:
        lines = ["phase,backend,seconds,mflop_model"]
        for row in rows:
            lines.append(
                f"{row['phase']},{row['backend']},{row['seconds']:.6f},"
                f"{row['mflop_model']:.1f}"
            )
        atomic_write(out_path, "\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
