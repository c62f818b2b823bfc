"""Synthetic first-booking dataset with a fixed destination prior.

Generates a schema-compatible stand-in for a two-table bookings dataset:
one row per user (demographics plus signup device/browser) and one row per
web session (action, device, duration), with the true destination label
returned separately.  Destination labels are drawn from the DESTINATION_PRIORS
table; conditional on the label the generator injects signal through the
age band, the gender-specified flag (a logistic link in the booked
indicator), the session count (a log link), and a mild language/destination
affinity.

All coefficients below are ARBITRARY documented constants chosen to make
the classes learnable; they are not estimates of any real booking data.
"""

from __future__ import annotations

import math

import numpy as np

from .rng import Rng
from .tabular import Column, Table, categorical_column

DESTINATIONS = ("AU", "CA", "DE", "ES", "FR", "GB", "IT", "NDF",
                "NL", "PT", "US", "other")

# Out-of-sample class percentages; they total 100.22, so draws use the
# normalized vector.
DESTINATION_PRIORS = {
    "AU": 0.3, "CA": 0.6, "DE": 0.5, "ES": 1.0, "FR": 2.2, "GB": 1.2,
    "IT": 1.2, "NDF": 59.0, "NL": 0.31, "PT": 0.11, "US": 29.0, "other": 4.8,
}

AGE_MISSING_RATE = 0.42

# gender-specified flag: P(specified) = sigmoid(G0 + G1 * booked)
GENDER_LINK = (-0.2007, 1.9353)
GENDER_LEVELS = ("FEMALE", "MALE", "OTHER")
GENDER_PROPS = (0.49, 0.49, 0.02)

# age value given label group: (mean, std), clipped to [18, 90]
AGE_BOOKED = (32.0, 6.0)
AGE_NDF = (45.0, 12.0)

# session count: 1 + Poisson(exp(S0 + S1 * booked))
SESSION_LINK = (0.9, 1.2)

LANGUAGES = ("de", "en", "es", "fr", "it", "nl", "pt", "zh")
BASE_LANGUAGE_PROPS = (0.03, 0.82, 0.03, 0.03, 0.03, 0.02, 0.02, 0.02)
NATIVE_LANGUAGE = {"FR": "fr", "ES": "es", "IT": "it", "DE": "de",
                   "PT": "pt", "NL": "nl"}
NATIVE_BOOST = 0.35          # P(native language | matching destination)
NATIVE_EN_SHARE = 0.50       # P(en | matching destination)

DEVICES = ("desktop", "phone", "tablet")
DEVICE_PROPS_BOOKED = (0.62, 0.28, 0.10)
DEVICE_PROPS_NDF = (0.45, 0.44, 0.11)

BROWSERS = ("chrome", "firefox", "ie", "other", "safari")
BROWSER_PROPS = (0.45, 0.15, 0.10, 0.05, 0.25)

ACTIONS = ("booking_request", "message_host", "search", "update_profile",
           "view_listing")
ACTION_PROPS_BOOKED = (0.20, 0.15, 0.35, 0.05, 0.25)
ACTION_PROPS_NDF = (0.02, 0.05, 0.45, 0.13, 0.35)

# session duration: exp(mu + sigma * z) seconds
DURATION_BOOKED = (3.6, 0.9)
DURATION_NDF = (3.2, 1.0)


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def _language_props(dest: str) -> np.ndarray:
    props = np.array(BASE_LANGUAGE_PROPS)
    native = NATIVE_LANGUAGE.get(dest)
    if native is None:
        return props
    out = np.zeros(len(LANGUAGES))
    rest = 1.0 - NATIVE_BOOST - NATIVE_EN_SHARE
    others = [i for i, lang in enumerate(LANGUAGES)
              if lang not in ("en", native)]
    for i in others:
        out[i] = rest / len(others)
    out[LANGUAGES.index("en")] = NATIVE_EN_SHARE
    out[LANGUAGES.index(native)] = NATIVE_BOOST
    return out


def synth_bookings(n_users: int, seed: int):
    """(users, sessions, labels): two Tables plus the destination per user."""
    if n_users < 100:
        raise ValueError("need at least 100 users")
    rng = Rng(seed)

    prior = np.array([DESTINATION_PRIORS[d] for d in DESTINATIONS])
    prior = prior / prior.sum()
    label_codes = rng.categorical(prior, n_users)
    labels = [DESTINATIONS[c] for c in label_codes]
    booked = label_codes != DESTINATIONS.index("NDF")

    user_ids = [f"u{i:06d}" for i in range(n_users)]

    # age: missingness independent of the label, value from the group law
    age_missing = rng.bernoulli(AGE_MISSING_RATE, n_users).astype(bool)
    z = rng.std_normal(n_users)
    mean = np.where(booked, AGE_BOOKED[0], AGE_NDF[0])
    std = np.where(booked, AGE_BOOKED[1], AGE_NDF[1])
    age = np.clip(np.round(mean + std * z), 18, 90)

    # gender: specified via the logistic link, level from fixed proportions
    p_spec = np.where(booked,
                      _sigmoid(GENDER_LINK[0] + GENDER_LINK[1]),
                      _sigmoid(GENDER_LINK[0]))
    gender_missing = rng.uniform01(n_users) >= p_spec
    gender_draw = rng.categorical(np.array(GENDER_PROPS), n_users)
    gender = np.array([GENDER_LEVELS[g] for g in gender_draw], dtype=object)
    gender[gender_missing] = ""

    # language: destination affinity
    lang_u = rng.uniform01(n_users)
    language = np.empty(n_users, dtype=object)
    for dest in DESTINATIONS:
        mask = np.array([lab == dest for lab in labels])
        if not mask.any():
            continue
        edges = np.cumsum(_language_props(dest))
        edges[-1] = 1.0
        language[mask] = [LANGUAGES[j] for j in
                          np.searchsorted(edges, lang_u[mask], side="right")]

    device_u = rng.uniform01(n_users)
    edges_b = np.cumsum(DEVICE_PROPS_BOOKED)
    edges_n = np.cumsum(DEVICE_PROPS_NDF)
    device_idx = np.where(booked,
                          np.searchsorted(edges_b, device_u, side="right"),
                          np.searchsorted(edges_n, device_u, side="right"))
    signup_device = np.array([DEVICES[min(i, 2)] for i in device_idx], dtype=object)

    browser_draw = rng.categorical(np.array(BROWSER_PROPS), n_users)
    signup_browser = np.array([BROWSERS[b] for b in browser_draw], dtype=object)

    users = Table([
        categorical_column("user_id", user_ids),
        Column("age", "numeric", np.where(age_missing, 0.0, age), age_missing),
        Column("gender", "categorical", gender, gender_missing),
        categorical_column("language", language),
        categorical_column("signup_device", signup_device),
        categorical_column("signup_browser", signup_browser),
    ])

    # sessions: count via the log link, attributes drawn per session
    lam = np.exp(SESSION_LINK[0] + SESSION_LINK[1] * booked.astype(np.float64))
    counts = np.empty(n_users, dtype=np.int64)
    for i in range(n_users):
        counts[i] = 1 + rng.poisson(float(lam[i]), 1)[0]
    total = int(counts.sum())
    session_user = np.repeat(np.array(user_ids, dtype=object), counts)
    session_booked = np.repeat(booked, counts)

    act_u = rng.uniform01(total)
    edges_ab = np.cumsum(ACTION_PROPS_BOOKED)
    edges_an = np.cumsum(ACTION_PROPS_NDF)
    act_idx = np.where(session_booked,
                       np.searchsorted(edges_ab, act_u, side="right"),
                       np.searchsorted(edges_an, act_u, side="right"))
    action = np.array([ACTIONS[min(i, len(ACTIONS) - 1)] for i in act_idx],
                      dtype=object)

    dev_u = rng.uniform01(total)
    dev_idx = np.where(session_booked,
                       np.searchsorted(edges_b, dev_u, side="right"),
                       np.searchsorted(edges_n, dev_u, side="right"))
    session_device = np.array([DEVICES[min(i, 2)] for i in dev_idx], dtype=object)

    dz = rng.std_normal(total)
    dmu = np.where(session_booked, DURATION_BOOKED[0], DURATION_NDF[0])
    dsd = np.where(session_booked, DURATION_BOOKED[1], DURATION_NDF[1])
    duration = np.round(np.exp(dmu + dsd * dz), 1)

    sessions = Table([
        categorical_column("user_id", session_user),
        categorical_column("action_type", action),
        categorical_column("device_type", session_device),
        Column("duration", "numeric", duration, np.zeros(total, dtype=bool)),
    ])
    return users, sessions, labels
