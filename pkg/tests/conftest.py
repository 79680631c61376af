from hypothesis import settings

# first calls pay for scipy/numba-free but cache-cold setup; timing is not what these tests check
settings.register_profile("default", deadline=None)
settings.load_profile("default")
