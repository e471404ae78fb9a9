"""Simulated Dickey-Fuller quantiles (constant only); generated by tools/make_df_table.py."""

SIZES = (25, 50, 100, 250, 500, 1000, 2500)
REPS = (1000000, 1000000, 1000000, 1000000, 1000000, 1000000, 400000)
QUANTILES = (
    (-4.6784, -4.0157, -3.7262, -3.3154, -2.9883, -2.7856, -2.6331, -2.4084, -2.2359, -1.9650, -1.7420, -1.5374, -1.3309, -1.1010, -0.8081, -0.6178, -0.3717, -0.2101, -0.0008, 0.3243, 0.7087, 0.9729, 1.5579),
    (-4.3684, -3.8167, -3.5647, -3.2095, -2.9172, -2.7328, -2.5962, -2.3869, -2.2253, -1.9658, -1.7503, -1.5496, -1.3474, -1.1213, -0.8351, -0.6481, -0.4037, -0.2464, -0.0380, 0.2820, 0.6660, 0.9209, 1.4715),
    (-4.2302, -3.7260, -3.4949, -3.1639, -2.8898, -2.7140, -2.5816, -2.3789, -2.2210, -1.9673, -1.7559, -1.5574, -1.3571, -1.1330, -0.8490, -0.6636, -0.4219, -0.2647, -0.0576, 0.2618, 0.6362, 0.8901, 1.4311),
    (-4.1437, -3.6758, -3.4547, -3.1376, -2.8725, -2.7006, -2.5699, -2.3725, -2.2181, -1.9687, -1.7577, -1.5604, -1.3603, -1.1367, -0.8552, -0.6700, -0.4325, -0.2753, -0.0670, 0.2492, 0.6201, 0.8733, 1.4040),
    (-4.1313, -3.6563, -3.4431, -3.1306, -2.8673, -2.6989, -2.5718, -2.3751, -2.2200, -1.9722, -1.7623, -1.5669, -1.3675, -1.1459, -0.8644, -0.6796, -0.4412, -0.2841, -0.0779, 0.2372, 0.6060, 0.8601, 1.3728),
    (-4.1180, -3.6585, -3.4397, -3.1256, -2.8646, -2.6968, -2.5688, -2.3733, -2.2181, -1.9710, -1.7616, -1.5658, -1.3669, -1.1434, -0.8626, -0.6771, -0.4380, -0.2793, -0.0760, 0.2384, 0.6076, 0.8602, 1.3767),
    (-4.0935, -3.6453, -3.4314, -3.1238, -2.8652, -2.6964, -2.5692, -2.3727, -2.2187, -1.9703, -1.7614, -1.5652, -1.3673, -1.1446, -0.8591, -0.6756, -0.4366, -0.2808, -0.0780, 0.2407, 0.6120, 0.8663, 1.3868),
)
