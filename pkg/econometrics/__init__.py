"""Econometric toolkit: series handling, causality tests and volatility models."""
