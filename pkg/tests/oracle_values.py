"""Closed-form reference values, frozen from ``tools/freeze_oracles.py`` (mpmath, 40 digits)."""

FREE_SPECTRUM = {
    2: (-1.0, 1.0),
    3: (-1.414213562373095, 0.0, 1.414213562373095),
    5: (-1.7320508075688773, -1.0, 0.0, 1.0, 1.7320508075688773),
}

# clean L=1 chain at E=3: exponent log((3 + sqrt 5)/2) and contraction gap 1 - e^{-kappa}
KAPPA_E3 = 0.96242365011920689
GAP_H_E3 = 0.61803398874989485

# free chain IDS arccos(-E/2)/pi
FREE_IDS = {-1.0: 0.33333333333333333, 0.0: 0.5, 1.0: 0.66666666666666667, 0.3: 0.54792736977043688}

# |T phi|^2 / |phi|^2 for T = diag(2, 1/2), phi = (1, 1)
RN_DIAG_EXAMPLE = 2.125

# L=1, V=0, T=1, E=2i: Z_2 = E - 1/E and det(E - H_2)/det(E - H_1)
RICCATI_Z2_E2I = complex(0.0, 2.5)
DEAN_MARTIN_E2I = complex(0.0, 2.5)

# period-one chains V = 1 + lam v, T = 1 at E = 0.3
PERIODIC_IDS = {
    (1, 0.4): 0.31462770572649028,
    (1, 0.2): 0.35142397805331663,
    (1, 0.1): 0.36901011956554538,
    (1, 0.05): 0.37764270646087687,
    (-1, 0.4): 0.45207263022956312,
    (-1, 0.2): 0.41956937674483376,
    (-1, 0.1): 0.40301331597932171,
    (-1, 0.05): 0.39463569450639679,
}
