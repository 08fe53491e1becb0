"""How often the illustration targets hold across datasets.

For each seed: simulate the four-predictor dataset, compute the OLS estimate of
beta_2 under the same Almon basis, fit AGL and AGL-SS, and record selection,
the posterior mean of beta_2, SS inclusion of the inactive predictors and the
late/early omega dispersion ratio.

    python scripts/illustration_seed_sweep.py --seeds 12 --S 50000
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from bmidas.design import MixedFreqPanel, almon_basis, build_design, recover_slopes
from bmidas.gibbs import Hyperparams, Schedule
from bmidas.rng import make_rng
from bmidas.simulate import DgpConfig, ModelSpec, fit_panel, generate_dataset


def dispersion_ratio(omega_trace):
    n = omega_trace.shape[0] // 10
    return omega_trace[-n:].std(axis=0) / omega_trace[:n].std(axis=0)


def ols_beta2(panel):
    basis = almon_basis(3, panel.C, 2)
    design = build_design(panel, basis)
    theta = np.linalg.lstsq(design.Z, design.y, rcond=None)[0]
    return float(recover_slopes(theta[None, :], design, basis)[0, 1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--seeds", type=int, default=12)
    ap.add_argument("--S", type=int, default=50_000)
    ap.add_argument("--burn-in", type=int, default=10_000)
    ap.add_argument("--thin", type=int, default=10)
    ap.add_argument("--out", type=Path, default=Path("results/illustration_seeds.csv"))
    args = ap.parse_args()
    args.out.parent.mkdir(parents=True, exist_ok=True)

    cfg = DgpConfig.illustration()
    schedule = Schedule(args.S, args.burn_in, args.thin)
    rows = []
    for seed in range(args.seeds):
        full = generate_dataset(cfg, make_rng(seed)).panel
        panel = MixedFreqPanel(y=full.y[:cfg.T], x=full.x, m=full.m, C=full.C, h=0.0,
                               head=full.head)
        row = {"seed": seed, "ols_beta2": ols_beta2(panel)}
        for model in ("agl", "agl_ss"):
            fit = fit_panel(panel, ModelSpec(model, p=3, r=2), Hyperparams(), schedule,
                            make_rng(seed, 7), trace_every=1)
            row[f"{model}_selection"] = "".join(str(int(v)) for v in fit.selection.included)
            row[f"{model}_beta2"] = float(fit.beta_draws[:, 1].mean())
            row[f"{model}_max_dispersion"] = float(dispersion_ratio(fit.draws.omega_trace).max())
            if fit.selection.inclusion_prob is not None:
                row["ss_max_inactive_incl"] = float(fit.selection.inclusion_prob[[0, 2, 3]].max())
        rows.append(row)
        print(", ".join(f"{k}={v:.3f}" if isinstance(v, float) else f"{k}={v}"
                        for k, v in row.items()), flush=True)

    def rate(pred):
        return f"{sum(pred(r) for r in rows)}/{len(rows)}"

    print("selection (0,1,0,0) both models:",
          rate(lambda r: r["agl_selection"] == r["agl_ss_selection"] == "0100"))
    print("beta2 in [0.9, 1.1] both models:",
          rate(lambda r: all(0.9 <= r[f"{m}_beta2"] <= 1.1 for m in ("agl", "agl_ss"))))
    print("SS inactive inclusion < 0.2:", rate(lambda r: r["ss_max_inactive_incl"] < 0.2))
    print("dispersion < 0.1 AGL / SS:", rate(lambda r: r["agl_max_dispersion"] < 0.1),
          rate(lambda r: r["agl_ss_max_dispersion"] < 0.1))
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


if __name__ == "__main__":
    main()
