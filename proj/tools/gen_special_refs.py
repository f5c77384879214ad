"""Reference values for erfi, Dawson and 1F1 at 25 points, 20 significant digits (mpmath).

Arguments are evaluated at the binary64 value of the listed decimal, so the table measures
function error and not argument rounding.
"""
import sys

import mpmath as mp

mp.mp.dps = 40

ERFI_X = ["0.001", "0.01", "0.1", "0.25", "0.5", "0.75", "1", "1.5", "2", "2.5", "3", "3.5", "4",
          "4.5", "5", "-0.3", "-1.7", "0.02", "0.3333", "1.25", "2.75", "3.9", "4.2", "0.6", "1.9"]

# (a, b, z): the F_n closed forms use a = n + 1/2, b in {1/2, 3/2}, z = q^2 <= 25
HYP_ARGS = [
    ("0.5", "0.5", "0.01"), ("0.5", "1.5", "0.01"), ("1.5", "0.5", "1"), ("1.5", "1.5", "1"),
    ("2.5", "0.5", "2.25"), ("2.5", "1.5", "2.25"), ("3.5", "1.5", "4"), ("3.5", "0.5", "4"),
    ("4.5", "1.5", "6.25"), ("5.5", "0.5", "9"), ("5.5", "1.5", "9"), ("6.5", "1.5", "12.25"),
    ("7.5", "0.5", "16"), ("8.5", "1.5", "20.25"), ("9.5", "1.5", "25"), ("1.5", "1.5", "25"),
    ("0.5", "0.5", "25"), ("2.5", "1.5", "0.25"), ("10.5", "0.5", "4"), ("12.5", "1.5", "1"),
    ("3.5", "1.5", "10"), ("4.5", "0.5", "15"), ("6.5", "0.5", "0.5"), ("1.5", "0.5", "18"),
    ("2.5", "1.5", "22"),
]


def main(out):
    with open(out, "w") as f:
        f.write("kind,a,b,x,value\n")
        for x in ERFI_X:
            xv = mp.mpf(float(x))
            f.write("erfi,,,%s,%s\n" % (x, mp.nstr(mp.erfi(xv), 20)))
            d = mp.sqrt(mp.pi) / 2 * mp.exp(-xv ** 2) * mp.erfi(xv)
            f.write("dawson,,,%s,%s\n" % (x, mp.nstr(d, 20)))
        for a, b, z in HYP_ARGS:
            v = mp.hyp1f1(mp.mpf(float(a)), mp.mpf(float(b)), mp.mpf(float(z)))
            f.write("hyp1f1,%s,%s,%s,%s\n" % (a, b, z, mp.nstr(v, 20)))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "special_refs.csv")
