"""Synthetic data with exact ground truth, and the metrics that score against it."""
from .activity import (ActivityDataset, AppearanceSignature, MotionSignature, SyntheticActivitySpec,
                       default_activity_specs, gen_activity_dataset, render_activity_clip)
from .clips import (FLOW_BOUND, SyntheticClipSpec, gen_clip, gen_flow_dataset, interior_mask,
                    make_texture, random_velocity)
from .geo import (PARADE_DATES, SF_BBOX, SF_WEATHER_2016, EventSpec, GeoScenarioSpec, GeoTruth, Hotspot,
                  WeatherCoupling, crime_reference_grid, distance_to_route, gen_geo_detections, modulation,
                  route_point, sf_scenario)
from .metrics import endpoint_error
