"""Smocked metric spaces: exact distances, constants, balls, tangent cones."""

from .errors import (BudgetExceeded, DomainError, PatternSyntaxError, PreconditionError,
                     SmockError, ValidationError)
from .pattern import (BoundingBox, Point2, SmockingPattern, Stitch, StitchId, StitchTemplate,
                      builtin_pattern, distance_to_smocking_set, interval_pattern, load_pattern,
                      parse_pattern, point_stitch_distance, stitch_stitch_distance,
                      stitches_in_box, tube_contains)

__version__ = "0.1.0"
