"""Print the closed-form reference values used by the test suite.

The numbers are evaluated with mpmath at 40 digits, independently of the
package, and pasted into ``tests/oracle_values.py``.
"""
import mpmath as mp

mp.mp.dps = 40


def show(name, value):
    print(f"{name} = {mp.nstr(value, 17)}")


def main():
    # free chain eigenvalues 2 cos(k pi / (N + 1))
    for N in (2, 3, 5):
        vals = sorted(2 * mp.cos(k * mp.pi / (N + 1)) for k in range(1, N + 1))
        print(f"FREE_SPECTRUM_N{N} = ({', '.join(mp.nstr(v, 17) for v in vals)})")
    # clean L=1 hyperbolic exponent at E=3: root x of x + 1/x = 3
    x = (3 + mp.sqrt(5)) / 2
    show("KAPPA_E3", mp.log(x))
    show("GAP_H_E3", 1 - 1 / x)
    # free chain IDS arccos(-E/2)/pi
    for E in (-1, 0, 1, mp.mpf("0.3")):
        show(f"FREE_IDS[{mp.nstr(E, 3)}]", mp.acos(-E / 2) / mp.pi)
    # cocycle example T = diag(2, 1/2), frame (1; 1): |T phi|^2 / |phi|^2
    show("RN_DIAG_EXAMPLE", (mp.mpf(4) + mp.mpf(1) / 4) / 2)
    # Riccati / Dean-Martin at L=1, V=0, T=1, E=2i: Z_2 = E - 1/E
    E = mp.mpc(0, 2)
    z2 = E - 1 / E
    print(f"RICCATI_Z2_E2I = complex({mp.nstr(z2.real, 17)}, {mp.nstr(z2.imag, 17)})")
    dm = (E * E - 1) / E
    print(f"DEAN_MARTIN_E2I = complex({mp.nstr(dm.real, 17)}, {mp.nstr(dm.imag, 17)})")
    # periodic L=1 chain V=v, T=1: IDS = arccos(-(E - v)/2)/pi
    for v in (1, -1):
        for lam in ("0.4", "0.2", "0.1", "0.05"):
            Ev = mp.mpf("0.3") - (1 + v * mp.mpf(lam))
            show(f"PERIODIC_IDS[v={v},lam={lam}]", mp.acos(-Ev / 2) / mp.pi)


if __name__ == "__main__":
    main()
