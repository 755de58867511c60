"""Motion retargeting, plausibility metrics, trajectory correction and PD control math."""
