"""Closed label vocabularies shared by inference, logbook and synth."""

ACTIVITIES = (
    "lying",
    "sitting",
    "standing",
    "walking",
    "ascending_stairs",
    "descending_stairs",
    "jogging",
    "biking",
    "unknown",
)

# coarse classes used by the dataset synthesizer
SYNTH_CLASSES = ("lying", "sitting", "standing", "walking", "stairs")

SCENES = (
    "beach",
    "bus",
    "cafe_restaurant",
    "car",
    "city_center",
    "forest_path",
    "grocery_store",
    "home",
    "library",
    "metro_station",
    "office",
    "park",
    "residential_area",
    "train",
    "tram",
)
