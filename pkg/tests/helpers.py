"""Shared test utilities (importable because pytest puts tests/ on sys.path)."""

import numpy as np

from twfilm.cli import main

HET_FLAGS = ["--sigma", "szyszkowski:1:1", "--G", "1", "--D", "1", "--hstar", "1"]
SWEEP_TEXT = "# three diffusivities\nsigma=szyszkowski:1:1\nG=1\nD=0.5,1,2\nH_star=1\nxi_min=-25\nxi_max=25\n"


def log_field(model, params):
    """Vectorised field in z = ln(H - H*), u = ln(Gamma) for many states stacked as [z..., u...].

    Written out from the reduced ODEs independently of the shooting module.
    """
    G, D, Hs = params.G, params.D, params.H_star

    def fn(_, y):
        z, u = np.split(np.asarray(y), 2)
        e, g = np.exp(z), np.exp(u)
        H = Hs + e
        r = model.rho_raw(g)
        den = g * H + 4 * D * r
        dz = (6 * g * H * (2 * Hs - H) / e - 12 * D * r) / (G * H ** 3 * den)
        du = 2 * (H - 3 * Hs) * r / (H * den)
        return np.concatenate([dz, du])

    return fn


def snapshot(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def run_every_command(root):
    """Run solve (three regimes), phase, verify and sweep into ``root``; return exit codes and file bytes."""
    root.mkdir()
    (root / "s.txt").write_text(SWEEP_TEXT)
    codes = [
        main(["solve", *HET_FLAGS, "--out", str(root / "het.csv")]),
        main(["solve", "--sigma", "frumkin:1:1:1", "--G", "1", "--D", "0", "--hstar", "1",
              "--out", str(root / "g.csv")]),
        main(["solve", "--sigma", "szyszkowski:1:1", "--G", "0", "--D", "2", "--hstar", "1",
              "--out", str(root / "d.csv")]),
        main(["phase", *HET_FLAGS, "--grid", "21", "--out", str(root / "ph.csv")]),
        main(["verify", str(root / "het.csv"), "--out", str(root / "het.report")]),
        main(["sweep", "--config", str(root / "s.txt"), "--out", str(root / "sw")]),
    ]
    return codes, snapshot(root)
