import os

from hypothesis import HealthCheck, settings

# numeric property tests routinely exceed the default 200 ms deadline on the
# first (compilation/caching) example; disable it and keep example counts modest
settings.register_profile(
    "default",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("thorough", deadline=None, max_examples=300)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))
