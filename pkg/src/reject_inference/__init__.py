"""Reject inference for credit scoring with shallow self-learning and the kickout measure."""
