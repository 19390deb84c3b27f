from hypothesis import HealthCheck, settings

# Simulation-backed properties are slow per example; wall-clock deadlines
# only add flakiness on shared machines.
settings.register_profile(
    "driftlab",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("driftlab")
