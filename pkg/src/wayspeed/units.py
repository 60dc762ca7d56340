"""Unit conversion constants shared across the package."""

# Exact statute-mile factor. All mph thresholds are converted with this and
# nothing else; rounded display values (40 km/h for 25 mph) are a policy
# option, not a conversion.
MPH_TO_KMH = 1.609344
