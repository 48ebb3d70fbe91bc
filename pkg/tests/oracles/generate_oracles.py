"""Tabulate reference values with mpmath at 50 digits.

Run from the repository root:  python3 tests/oracles/generate_oracles.py
The output, tests/data/oracles.json, is committed; tests only read it.
"""

import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 50
OUT = Path(__file__).resolve().parents[1] / "data" / "oracles.json"


def gauss(x):
    return mp.exp(-x * x / 2)


def cauchy(x, mu=0):
    return 1 / (mp.pi * (1 + (x - mu) ** 2))


def student_t(x, nu):
    c = mp.gamma((nu + 1) / 2) / (mp.gamma(nu / 2) * mp.sqrt(nu * mp.pi))
    return c * (1 + x * x / nu) ** (-(nu + 1) / 2)


def nig(x, alpha, beta, mu, delta):
    g = mp.sqrt(alpha ** 2 - beta ** 2)
    q = mp.sqrt(delta ** 2 + (x - mu) ** 2)
    return alpha * delta * mp.besselk(1, alpha * q) / (mp.pi * q) * mp.exp(delta * g + beta * (x - mu))


def line(f):
    return mp.quad(f, [-mp.inf, -10, -1, 0, 1, 10, mp.inf])


def main():
    out = {}
    out["cauchy_gauss"] = {
        "m0": line(lambda x: cauchy(x) * gauss(x)),
        "m2": line(lambda x: x * x * cauchy(x) * gauss(x)),
        "cf_t2": line(lambda x: mp.cos(2 * x) * cauchy(x) * gauss(x)),
        "cf_t05": line(lambda x: mp.cos(x / 2) * cauchy(x) * gauss(x)),
    }
    out["student_t3_gauss_moments"] = [
        line(lambda x, n=n: x ** n * student_t(x, 3) * gauss(x)) for n in range(13)
    ]
    # symmetric stable through Parseval: int f(x) x^n e^{-x^2/2} dx from the CF e^{-|t|^a}
    alpha = mp.mpf("1.5")
    c = 1 / mp.sqrt(2 * mp.pi)
    out["stable15_gauss"] = {
        "m0": 2 * c * mp.quad(lambda t: mp.exp(-t ** alpha - t * t / 2), [0, 1, mp.inf]),
        "m2": 2 * c * mp.quad(lambda t: mp.exp(-t ** alpha - t * t / 2) * (1 - t * t), [0, 1, mp.inf]),
    }
    out["nig_gauss"] = {
        "params": {"alpha": 2, "beta": 1, "mu": 0, "delta": 1},
        "moments": [line(lambda x, n=n: x ** n * nig(x, 2, 1, 0, 1) * gauss(x)) for n in range(5)],
    }
    out["location_m1"] = {
        "mu=1,sigma=1": line(lambda x: x * gauss(x) * cauchy(x, 1)),
        "mu=0.5,sigma=2": line(lambda x: x * mp.exp(-x * x / 8) * cauchy(x, mp.mpf("0.5"))),
    }
    out["weighted_cdf_cauchy_gauss"] = {
        "a=0.7": mp.quad(lambda x: cauchy(x) * gauss(x), [-mp.inf, -10, -1, 0, mp.mpf("0.7")]),
    }

    def conv(v):
        if isinstance(v, dict):
            return {k: conv(x) for k, x in v.items()}
        if isinstance(v, list):
            return [conv(x) for x in v]
        if isinstance(v, mp.mpf):
            return mp.nstr(v, 30)
        return v

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps({"dps": 50, "values": conv(out)}, indent=1) + "\n")


if __name__ == "__main__":
    main()
