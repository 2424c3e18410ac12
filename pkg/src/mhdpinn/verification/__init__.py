"""Manufactured solutions, error norms, Hodge diagnostics and studies."""
