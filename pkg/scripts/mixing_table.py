"""phi/beta coefficients and fitted envelopes for a few copula families."""
from markov_rkhs.copulas import Copula, band_copula, mixing_table

FAMILIES = {
    "fgm(0.1)": Copula.fgm(0.1),
    "fgm(0.5)": Copula.fgm(0.5),
    "fgm(0.9)": Copula.fgm(0.9),
    "mixture(0.3, fgm(-0.8))": Copula.mixture(0.3, Copula.fgm(-0.8)),
    "mixture(0.05, band(256, 8))": Copula.mixture(0.05, Copula.from_grid(band_copula(256, 8))),
}

for name, c in FAMILIES.items():
    tab = mixing_table(c, 6, 512)
    p = tab.phi_profile
    print(f"{name}: phi envelope D={p.D:.4g} r={p.r:.4g} mixing factor (theta<1) {1 + 4 * p.D * p.r / (1 - p.r) if p.D else 1.0:.4g}")
    for t, ph, be in tab.rows():
        print(f"  t={t}  phi={ph:.6f}  beta={be:.6f}")
