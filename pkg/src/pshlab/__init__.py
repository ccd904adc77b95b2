"""Plurisubharmonic approximation and exhaustion toolkit."""
