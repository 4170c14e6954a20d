"""Independent reference implementations the tests compare against.

Everything here is deliberately written from the printed model equations
and textbook definitions using plain loops, dictionaries, and scipy --
none of the package's vectorized or compiled code paths are reused. When
a test freezes a numeric value, this module is where it came from.
"""
import math

import numpy as np
from scipy import stats

# Demographic and clinical constants, copied from the source tables
# rather than imported, so a transcription slip in the package is caught.
ALPHA = (1 / 8, 1 / 8, 1 / 8, 1 / 24, 1 / 48, 1 / 144)
DELTA = 1 / 13
TAU = 1 / 52
GAMMA1 = 1.0
GAMMA2 = 2.0
XI = 7.0
SIGMA = (1.0, 0.62, 0.37, 0.37)
IOTA = (1.0, 0.5, 0.2, 0.2)
KAPPA = (0.62, 0.65, 0.85)
SEVERE_FRACTIONS = (0.13, 0.03, 0.0)
SEVERE_SPLIT = 0.24
MILD_SPLIT = 0.76
MEAN_BIRTH_RATE = 1 / 260
BIRTH_AMPLITUDES = (-0.17, 0.01, 0.03, 0.25, 0.12, 0.03,
                    -0.01, 0.09, 0.01, 0.13, -0.31, -0.17)
CONTACT = (
    (1, 1, 1, 1, 1, 1),
    (1, 1, 1, 1, 1, 1),
    (1, 1, 1, 1, 1, 1),
    (3, 3, 3, 1, 1, 1),
    (6, 6, 6, 2, 1, 1),
    (18, 18, 18, 6, 3, 1),
)

ORACLE_COMPARTMENTS = {
    "A": ("M", "S", "Is", "Im", "R"),
    "B": ("M", "S1", "I1", "R1", "S2", "I2", "R2", "S3", "I3", "R3"),
    "C": ("M", "S1", "E1", "I1", "R1", "S2", "E2", "I2", "R2",
          "S3", "E3", "I3", "R3"),
    "D": ("M", "S1", "I1", "S2", "I2", "S3", "I3", "S4", "I4", "Rfinal"),
    "E": ("M", "S1", "I1", "S2", "I2", "S3", "I3", "S4", "I4", "Rfinal"),
}


def stationary_fractions(alpha=ALPHA):
    """Equal-throughput occupancies of the aging chain, normalized."""
    f = np.array([1.0 / a for a in alpha])
    return f / f.sum()


def maternal_fractions(alpha=ALPHA, delta=DELTA):
    """Fraction of each age class still maternally protected at the
    demographic steady state of the birth -> M -> S chain."""
    m = [0.0] * 6
    m[0] = 1.0 / (alpha[0] + delta)          # unit birth inflow
    for i in range(1, 6):
        m[i] = alpha[i - 1] * m[i - 1] / (alpha[i] + delta)
    per_class = np.array([1.0 / a for a in alpha])
    return np.array(m) / per_class


def birth_rate(t, mean_rate=MEAN_BIRTH_RATE, amplitudes=BIRTH_AMPLITUDES):
    month = int(((t - 1.0) % 52.0) * 12.0 / 52.0)
    month = 11 if month > 11 else month
    return mean_rate * (1.0 + amplitudes[month])


def seasonal_beta(j, t, b, phi, beta0):
    return beta0[j] * (1.0 + b * math.cos((2 * math.pi * t - 52 * phi) / 52))


def force_of_infection(model_id, comp, t, b, phi, beta0,
                       contact=CONTACT, alpha=ALPHA):
    """lambda_i = sum_j beta_j(t) C_ij w_j / N_j from the printed formula."""
    names = ORACLE_COMPARTMENTS[model_id]
    n = [sum(comp[(name, a)] for name in names) for a in range(6)]
    lam = []
    for i in range(6):
        total = 0.0
        for j in range(6):
            if model_id == "A":
                w = comp[("Is", j)] + 0.5 * comp[("Im", j)]
            elif model_id in ("B", "C"):
                w = (comp[("I1", j)] + 0.5 * comp[("I2", j)]
                     + 0.2 * comp[("I3", j)])
            else:
                w = (comp[("I1", j)] + 0.5 * comp[("I2", j)]
                     + 0.2 * comp[("I3", j)] + 0.2 * comp[("I4", j)])
            total += seasonal_beta(j, t, b, phi, beta0) \
                * contact[i][j] * w / n[j]
        lam.append(total)
    return lam


def _aging(comp, name, i, alpha=ALPHA):
    inflow = alpha[i - 1] * comp[(name, i - 1)] if i > 0 else 0.0
    return inflow - alpha[i] * comp[(name, i)]


def derivative(model_id, comp, t, b, phi, beta0, birth_population=None,
               mean_rate=MEAN_BIRTH_RATE, amplitudes=BIRTH_AMPLITUDES):
    """Term-by-term evaluation of one model's printed equations.

    `comp` maps (compartment_name, age_class) to occupancy. Returns
    (derivative dict, incidence dict) where incidence holds the per-order
    new-infection event rates lambda_k S_k (Model A: the severe and mild
    branch inflows).
    """
    lam = force_of_infection(model_id, comp, t, b, phi, beta0)
    names = ORACLE_COMPARTMENTS[model_id]
    n = birth_population if birth_population is not None else \
        sum(comp[(name, a)] for name in names for a in range(6))
    births = birth_rate(t, mean_rate, amplitudes) * n
    d = {}
    inc = {}
    for i in range(6):
        born = births if i == 0 else 0.0
        d[("M", i)] = _aging(comp, "M", i) + born - DELTA * comp[("M", i)]
        if model_id == "A":
            s, is_, im = comp[("S", i)], comp[("Is", i)], comp[("Im", i)]
            d[("S", i)] = (_aging(comp, "S", i) + DELTA * comp[("M", i)]
                           - lam[i] * s + TAU * comp[("R", i)])
            d[("Is", i)] = (_aging(comp, "Is", i)
                            + SEVERE_SPLIT * lam[i] * s - GAMMA1 * is_)
            d[("Im", i)] = (_aging(comp, "Im", i)
                            + MILD_SPLIT * lam[i] * s - GAMMA2 * im)
            d[("R", i)] = (_aging(comp, "R", i) + GAMMA1 * is_
                           + GAMMA2 * im - TAU * comp[("R", i)])
            inc[("severe", i)] = SEVERE_SPLIT * lam[i] * s
            inc[("mild", i)] = MILD_SPLIT * lam[i] * s
        elif model_id in ("B", "C"):
            lam_k = [SIGMA[k] * lam[i] for k in range(3)]
            gam = (GAMMA1, GAMMA2, GAMMA2)
            for k, order in enumerate(("1", "2", "3")):
                sk = comp[("S" + order, i)]
                ik = comp[("I" + order, i)]
                rk = comp[("R" + order, i)]
                if k == 0:
                    s_in = DELTA * comp[("M", i)]
                elif k == 1:
                    s_in = TAU * comp[("R1", i)]
                else:
                    s_in = TAU * (comp[("R2", i)] + comp[("R3", i)])
                d[("S" + order, i)] = (_aging(comp, "S" + order, i)
                                       + s_in - lam_k[k] * sk)
                if model_id == "C":
                    ek = comp[("E" + order, i)]
                    d[("E" + order, i)] = (_aging(comp, "E" + order, i)
                                           + lam_k[k] * sk - XI * ek)
                    i_in = XI * ek
                else:
                    i_in = lam_k[k] * sk
                d[("I" + order, i)] = (_aging(comp, "I" + order, i)
                                       + i_in - gam[k] * ik)
                d[("R" + order, i)] = (_aging(comp, "R" + order, i)
                                       + gam[k] * ik - TAU * rk)
                inc[(("first", "second", "third")[k], i)] = lam_k[k] * sk
        else:
            lam_k = [SIGMA[k] * lam[i] for k in range(4)]
            gam = (GAMMA1, GAMMA2, GAMMA2, GAMMA2)
            recovered_in = 0.0
            for k, order in enumerate(("1", "2", "3", "4")):
                sk = comp[("S" + order, i)]
                ik = comp[("I" + order, i)]
                if k == 0:
                    s_in = DELTA * comp[("M", i)]
                else:
                    prev_out = gam[k - 1] * comp[("I" + str(k), i)]
                    if model_id == "E":
                        s_in = KAPPA[k - 1] * prev_out
                        recovered_in += (1.0 - KAPPA[k - 1]) * prev_out
                    else:
                        s_in = prev_out
                d[("S" + order, i)] = (_aging(comp, "S" + order, i)
                                       + s_in - lam_k[k] * sk)
                d[("I" + order, i)] = (_aging(comp, "I" + order, i)
                                       + lam_k[k] * sk - gam[k] * ik)
                inc[(("first", "second", "third", "fourth")[k], i)] = \
                    lam_k[k] * sk
            recovered_in += gam[3] * comp[("I4", i)]
            d[("Rfinal", i)] = (_aging(comp, "Rfinal", i) + recovered_in)
    return d, inc


def state_to_dict(state):
    """Unpack a package StateVector into the oracle's dict form."""
    comp = {}
    for name in state.layout.compartments:
        for a in range(6):
            comp[(name, a)] = state.get(name, a)
    return comp


def wired_derivative(model_id, comp, t, b, phi, beta0, coverage,
                     seroconversion, birth_population=None):
    """Two-dose wiring for the successive-infection models (B..E).

    Doses act on the class 1->2 and 2->3 aging flows; the seroconverted
    fraction s*c of each flow is moved one infection ahead (B/C: into the
    recovered compartment; D: into the next susceptible; E: split by the
    return fractions kappa, remainder fully immune).
    """
    d, inc = derivative(model_id, comp, t, b, phi, beta0, birth_population)
    sc = seroconversion * coverage
    a0, a1 = ALPHA[0], ALPHA[1]
    dose1_m = sc * a0 * comp[("M", 0)]
    dose1_s = sc * a0 * comp[("S1", 0)]
    d[("M", 1)] -= dose1_m
    d[("S1", 1)] -= dose1_s
    if model_id in ("B", "C"):
        d[("R1", 1)] += dose1_m + dose1_s
        dose2_r = sc * a1 * comp[("R1", 1)]
        dose2_s = sc * a1 * comp[("S2", 1)]
        d[("R1", 2)] -= dose2_r
        d[("S2", 2)] -= dose2_s
        d[("R2", 2)] += dose2_r + dose2_s
    elif model_id == "D":
        d[("S2", 1)] += dose1_m + dose1_s
        dose2 = sc * a1 * comp[("S2", 1)]
        d[("S2", 2)] -= dose2
        d[("S3", 2)] += dose2
    else:
        dose1 = dose1_m + dose1_s
        d[("S2", 1)] += KAPPA[0] * dose1
        d[("Rfinal", 1)] += (1.0 - KAPPA[0]) * dose1
        dose2 = sc * a1 * comp[("S2", 1)]
        d[("S2", 2)] -= dose2
        d[("S3", 2)] += KAPPA[1] * dose2
        d[("Rfinal", 2)] += (1.0 - KAPPA[1]) * dose2
    return d, inc


def wired_derivative_a(comp, t, b, phi, beta0, coverage, eta_severe,
                       eta_mild, birth_population=None,
                       mean_rate=MEAN_BIRTH_RATE,
                       amplitudes=BIRTH_AMPLITUDES):
    """Model A with an explicit vaccinated compartment V.

    Fraction c of the class 1->2 aging flow out of M and S enters V; V
    wanes back to S at tau and experiences breakthrough infection at the
    efficacy-discounted severe/mild forces.
    """
    names = ("M", "S", "Is", "Im", "R", "V")
    n = [sum(comp[(name, a)] for name in names) for a in range(6)]
    lam = []
    for i in range(6):
        total = 0.0
        for j in range(6):
            w = comp[("Is", j)] + 0.5 * comp[("Im", j)]
            total += seasonal_beta(j, t, b, phi, beta0) \
                * CONTACT[i][j] * w / n[j]
        lam.append(total)
    pop = birth_population if birth_population is not None else sum(n)
    births = birth_rate(t, mean_rate, amplitudes) * pop
    d = {}
    inc = {}
    for i in range(6):
        m_in = births if i == 0 else ALPHA[i - 1] * comp[("M", i - 1)]
        s_in = 0.0 if i == 0 else ALPHA[i - 1] * comp[("S", i - 1)]
        v_in = 0.0 if i == 0 else ALPHA[i - 1] * comp[("V", i - 1)]
        if i == 1:
            v_in += coverage * (m_in + s_in)
            m_in *= (1.0 - coverage)
            s_in *= (1.0 - coverage)
        ls = SEVERE_SPLIT * lam[i]
        lm = MILD_SPLIT * lam[i]
        bs = (1.0 - eta_severe) * ls
        bm = (1.0 - eta_mild) * lm
        m, s, is_, im = (comp[("M", i)], comp[("S", i)],
                         comp[("Is", i)], comp[("Im", i)])
        r, v = comp[("R", i)], comp[("V", i)]
        d[("M", i)] = m_in - ALPHA[i] * m - DELTA * m
        d[("S", i)] = (s_in - ALPHA[i] * s + DELTA * m - (ls + lm) * s
                       + TAU * r + TAU * v)
        d[("Is", i)] = (_aging(comp, "Is", i) + ls * s + bs * v
                        - GAMMA1 * is_)
        d[("Im", i)] = (_aging(comp, "Im", i) + lm * s + bm * v
                        - GAMMA2 * im)
        d[("R", i)] = (_aging(comp, "R", i) + GAMMA1 * is_ + GAMMA2 * im
                       - TAU * r)
        d[("V", i)] = v_in - ALPHA[i] * v - TAU * v - (bs + bm) * v
        inc[("severe", i)] = ls * s + bs * v
        inc[("mild", i)] = lm * s + bm * v
    return d, inc


# --------------------------------------------------------------------------
# Observation model

def nb_pmf(k, mu, r):
    """Negative binomial pmf via the term recurrence (no lgamma)."""
    if mu == 0.0:
        return 1.0 if k == 0 else 0.0
    p0 = (r / (r + mu)) ** r
    value = p0
    for j in range(1, k + 1):
        value *= (j - 1 + r) * (mu / (mu + r)) / j
    return value


def nb_pmf_scipy(k, mu, r):
    return float(stats.nbinom.pmf(k, r, r / (r + mu)))


# --------------------------------------------------------------------------
# Priors (truncated densities via scipy)

def log_prior(theta, beta_mean=20.0, beta_sd=5.0,
              rho_mean=0.117, rho_sd=0.06,
              phi_lo=2.0, phi_hi=2.0 + 2 * math.pi,
              r_shape=0.001, r_rate=0.001):
    b, phi, r, rho = theta[0], theta[1], theta[2], theta[3]
    betas = theta[4:10]
    if not (0 < b < 1 and phi_lo < phi < phi_hi and r > 0
            and 0 < rho <= 1 and all(v > 0 for v in betas)):
        return -math.inf
    total = stats.uniform.logpdf(b, 0, 1)
    total += stats.uniform.logpdf(phi, phi_lo, phi_hi - phi_lo)
    total += stats.gamma.logpdf(r, a=r_shape, scale=1.0 / r_rate)
    a_rho = (0.0 - rho_mean) / rho_sd
    b_rho = (1.0 - rho_mean) / rho_sd
    total += stats.truncnorm.logpdf(rho, a_rho, b_rho,
                                    loc=rho_mean, scale=rho_sd)
    a_beta = (0.0 - beta_mean) / beta_sd
    for v in betas:
        total += stats.truncnorm.logpdf(v, a_beta, math.inf,
                                        loc=beta_mean, scale=beta_sd)
    return float(total)


# --------------------------------------------------------------------------
# Posterior summaries and ensemble algebra

def hpd_interval(samples, level):
    """Exhaustive scan for the leftmost shortest window covering `level`."""
    srt = np.sort(np.asarray(samples, dtype=float))
    n = srt.size
    m = int(math.ceil(level * n))
    m = max(1, min(m, n))
    best = (math.inf, 0)
    for lo in range(0, n - m + 1):
        width = srt[lo + m - 1] - srt[lo]
        if width < best[0] - 1e-15:
            best = (width, lo)
    lo = best[1]
    return float(srt[lo]), float(srt[lo + m - 1])


def weighted_quantile(values, weights, q):
    """Leftmost value whose cumulative weight reaches q of the total.

    Exact-tie behaviour is float dependent, so cross-checks should use
    generic (irrational-ish) weights where the target never lands on a
    cumulative-sum boundary.
    """
    order = np.argsort(values, kind="stable")
    v = np.asarray(values, dtype=float)[order]
    w = np.asarray(weights, dtype=float)[order]
    target = q * math.fsum(w)
    running = 0.0
    for i in range(v.size):
        running += w[i]
        if running >= target:
            return float(v[i])
    return float(v[-1])


def mixture_quantile(sample_sets, model_weights, q):
    pooled = []
    weights = []
    for samples, wk in zip(sample_sets, model_weights):
        if wk == 0.0:
            continue
        for s in samples:
            pooled.append(s)
            weights.append(wk / len(samples))
    return weighted_quantile(pooled, weights, q)


def spectral_radius_power(matrix, iterations=10_000, tol=1e-14):
    m = np.asarray(matrix, dtype=float)
    v = np.ones(m.shape[0])
    last = 0.0
    for _ in range(iterations):
        v = m @ v
        norm = np.linalg.norm(v)
        if norm == 0.0:
            return 0.0
        v /= norm
        val = float(v @ m @ v)
        if abs(val - last) < tol * max(1.0, abs(val)):
            break
        last = val
    return abs(last)


def bic(max_log_likelihood, k, n):
    return -2.0 * max_log_likelihood + k * math.log(n)


def pmp(bics):
    b = np.asarray(bics, dtype=float)
    w = np.exp(-(b - b.min()) / 2.0)
    return w / w.sum()


# --------------------------------------------------------------------------
# Vaccine efficacy

def vaccine_efficacy(s, d1, d2, d3, sigma2=0.62, sigma3=0.37):
    return 1.0 - ((1 - s) ** 2 + 2 * s * (1 - s) * sigma2 * (d2 / d1)
                  + s ** 2 * sigma3 * (d3 / d1))


def invert_efficacy(ve, d1, d2, d3, grid=2_000_001):
    s = np.linspace(0.0, 1.0, grid)
    values = vaccine_efficacy(s, d1, d2, d3)
    idx = int(np.argmin(np.abs(values - ve)))
    return float(s[idx])
