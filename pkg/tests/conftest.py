from hypothesis import settings

settings.register_profile("dcconsol", database=None, deadline=None, max_examples=200)
settings.load_profile("dcconsol")
