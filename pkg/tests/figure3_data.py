"""The 33 published (governorate, benefit code, balance) report rows used to
build the checked-in fixture; every amount is asserted verbatim."""

FIGURE3_ROWS = [
    ("ARIANA", "66", 591330),
    ("ARIANA", "68", 2362968),
    ("ARIANA", "69", 37566960),
    ("ARIANA", "76", -1009980),
    ("ARIANA", "79", -298209150),
    ("BEJA", "78", -26717952),
    ("BEJA", "77", -1731614),
    ("BEJA", "68", 40000),
    ("BEJA", "69", 39360),
    ("BEN AROUS", "76", -582810),
    ("BEN AROUS", "79", -150068470),
    ("BEN AROUS", "78", -3482320),
    ("BEN AROUS", "77", -345355),
    ("BIZERTE", "68", 4225959),
    ("BIZERTE", "69", 4229682),
    ("BIZERTE", "76", -3229830),
    ("BIZERTE", "78", -74874146),
    ("KEBILI", "79", -449146660),
    ("KEBILI", "77", -4247556),
    ("KEBILI", "68", 2099890),
    ("GAFSA", "79", -314767820),
    ("GABES", "69", 300900),
    ("GABES", "78", -3087758),
    ("JENDOUBA", "66", 1319741991),
    ("JENDOUBA", "78", -24541515060),
    ("JENDOUBA", "79", -14624719902),
    ("JENDOUBA", "77", -3302096581),
    ("JENDOUBA", "67", 3409836784),
    ("JENDOUBA", "68", 25839668164),
    ("JENDOUBA", "69", 20906905563),
    ("JENDOUBA", "76", -520106112),
    ("KAIROUAN", "68", 28665),
    ("KAIROUAN", "79", -224636270),
]
