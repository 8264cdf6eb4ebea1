"""Label vocabularies shared by the dataset validator and the toolbox."""

OBJECT_LABELS: tuple[str, ...] = (
    "person", "bicycle", "car", "motorcycle", "airplane", "bus", "train",
    "truck", "boat", "traffic light", "fire hydrant", "stop sign",
    "parking meter", "bench", "bird", "cat", "dog", "horse", "sheep", "cow",
    "elephant", "bear", "zebra", "giraffe", "backpack", "umbrella", "handbag",
    "tie", "suitcase", "frisbee", "skis", "snowboard", "sports ball", "kite",
    "baseball bat", "baseball glove", "skateboard", "surfboard", "racket",
    "bottle", "wine glass", "cup", "fork", "knife", "spoon", "bowl", "banana",
    "apple", "sandwich", "orange", "broccoli", "carrot", "hot dog", "pizza",
    "donut", "cake", "chair", "couch", "potted plant", "bed", "dining table",
    "toilet", "tv", "laptop", "mouse", "remote", "keyboard", "phone",
    "microwave", "oven", "toaster", "sink", "refrigerator", "book", "clock",
    "vase", "scissors", "teddy bear", "hair drier", "toothbrush",
)

VEHICLE_TYPES: tuple[str, ...] = (
    "sedan", "SUV", "van", "hatchback", "MPV", "pickup", "bus", "truck", "estate",
)

VEHICLE_COLORS: tuple[str, ...] = (
    "yellow", "orange", "green", "gray", "red", "blue", "white", "golden",
    "brown", "black",
)

# Duplicate "Non-motor Vehicle Lane" in the source list collapsed.
TRAFFIC_SIGNS: tuple[str, ...] = (
    "Speed Limit 80", "No Bicycles", "No U-Turn", "Maximum Weight 55t",
    "Speed Limit 60", "Pedestrian Crossing", "No Honking",
    "Non-motor Vehicle Lane", "No Left Turn", "Yield",
    "Minimum Speed Limit 80", "Height Limit 4m", "Motor Vehicle Lane",
    "Speed Limit 70", "No Entry", "Height Limit 4.5m", "No Motorcycles",
    "No Large Buses", "No Rickshaws", "Crossroad Motor Vehicle Lane",
    "Speed Limit 30", "No Motor Vehicles",
    "No Parking (Except for Loading or Unloading)", "Children Crossing",
    "No Trucks", "No Two Specific Vehicles", "End of Speed Limit",
    "Speed Limit 20", "Maximum Weight 30t", "Speed Limit 40",
    "Speed Limit 120", "Road Work Ahead", "Height Limit 5m",
    "Minimum Speed Limit 60", "Pedestrians Crossing", "Speed Limit 100",
    "Merge Ahead", "Minimum Speed Limit 100", "No Right Turn",
    "Maximum Weight 20t", "Keep Right", "No Hazardous Materials",
    "Speed Limit 50",
)

MOTION_LABELS: tuple[str, ...] = ("accident", "collision")
SIGN_LABELS: tuple[str, ...] = ("traffic sign",)

# Object Detection class reported for each vehicle type.
VEHICLE_OBJECT_CLASS: dict[str, str] = {
    "sedan": "car", "SUV": "car", "van": "car", "hatchback": "car",
    "MPV": "car", "estate": "car", "pickup": "truck", "truck": "truck",
    "bus": "bus",
}
