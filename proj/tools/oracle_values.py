# Independent 30-digit reference values used by tests/test_oracle.cpp.
# Requires mpmath.
from mpmath import mp, mpf, sqrt, ellipe, quad, pi, cos, sin, diff

mp.dps = 30

a1, a2 = mpf(2), mpf(1)
print("perimeter ellipse 2:1", 4 * a1 * ellipe(1 - a2**2 / a1**2))
e = mpf("0.3")
b = sqrt(1 - e**2)
print("perimeter ellipse e=0.3", 4 * ellipe(e**2))
print("perimeter ellipse 1:0.9", 4 * ellipe(1 - mpf("0.81")))


def oval_length(m):
    # x^m + y^2 = 1 in polar form, rho = radius^2
    def pt(th):
        c, s = cos(th), sin(th)
        rho = mp.findroot(lambda rho: rho ** (m // 2) * c**m + rho * s**2 - 1, 1)
        r = sqrt(rho)
        return r * c, r * s

    speed = lambda th: sqrt(diff(lambda t: pt(t)[0], th) ** 2 + diff(lambda t: pt(t)[1], th) ** 2)
    return 4 * quad(speed, [0, pi / 4, pi / 2])


print("perimeter oval degree 4", oval_length(4))

eps = mpf("0.02")


def radius(t):
    return a1 * a2 / sqrt(a2**2 * cos(t) ** 2 + a1**2 * sin(t) ** 2) * (1 + eps * cos(3 * t))


for t0 in [mpf(0), pi]:
    r0, r1, r2 = radius(t0), diff(radius, t0), diff(radius, t0, 2)
    print("|K| fourier at polar angle", t0, (r0**2 + 2 * r1**2 - r0 * r2) / (r0**2 + r1**2) ** mpf(1.5))

lam = mpf("0.5")
for k in [mpf(49), mpf("0.25")]:
    tr = (1 + lam) ** 2 * k - 2 * lam
    disc = tr**2 - 4 * lam**2
    if disc > 0:
        print("k", k, "mu2", (tr + sqrt(disc)) / 2)
    else:
        print("k", k, "mu", tr / 2, "+-", sqrt(-disc) / 2, "i")

print("lambda_minus(0.25)", (1 - sqrt(mpf("0.75"))) / (1 + sqrt(mpf("0.75"))))
print("lambda_bar(-0.5)", (1 - sqrt(mpf("0.5"))) / (1 + sqrt(mpf("0.5"))))

# cone-field dissipation bound for e = 0.3, a1 = 1 with the 1.01 / 1.05 safety factors
K0 = mpf("1.01") / b**2
d0 = mpf("1.05") * 2
c0 = (-1 - 2 * (e**2 - 1)) / 2
al = c0 / (2 * d0)
mu0 = mpf("0.5")
print("cone bound", mu0 * al * c0 / (2 * (d0 * K0**2 + 2 * K0) + 2 * al * (d0 * K0 + 1)))
