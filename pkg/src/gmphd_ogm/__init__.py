"""Online multi-object tracking with a GM-PHD filter and occlusion group management."""
