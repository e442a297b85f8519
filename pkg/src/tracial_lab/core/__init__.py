"""Core package: error hierarchy, CLI error handler, numerical defaults."""
