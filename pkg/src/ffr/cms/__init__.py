"""Human scoring service: sessions, append-only event logs, aggregation."""
