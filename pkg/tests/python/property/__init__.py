"""Property-based tests package."""
