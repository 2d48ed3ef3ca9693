# Keeps tests/ on sys.path so test modules can import the shared oracles.
