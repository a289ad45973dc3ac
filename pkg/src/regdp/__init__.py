"""Tikhonov regularization with discrepancy-principle parameter choice."""
