"""Draw one random network and solve it with the joint transmission NOMA scheme."""

import logging

import jtnoma

logging.basicConfig(level=logging.INFO)

# 1. A scenario is a NetworkConfig. `default` fills in the sizes of the web, video and
# audio scenarios; everything can be overridden.
config = jtnoma.NetworkConfig.default("web", num_sbs=3, num_sut=4, num_subcarriers=6, num_put=2)

# 2. Drawing an instance places the base stations and users and samples the channels.
# The same seed always gives the same instance.
inst = jtnoma.generate_instance(config)
print(jtnoma.validate_instance(inst))

# 3. Alternate power control and scheduling until the total QoE settles
settings = jtnoma.AlgorithmSettings(max_outer_iters=10)
report = jtnoma.run_algorithm1(inst, settings)

print(f"Status: {report.status.value} after {report.iterations} iterations")
print(f"Total QoE: {report.utility:.4f}")
print(f"MOS per SUT: {report.per_user_mos.round(3)}")
print(f"Rate per SUT [bits/s/Hz]: {report.per_user_rate.round(3)}")

# 4. The final audit lists every constraint family with its worst residual
if report.violations is not None:
    audit = report.violations.to_frame(settings.tolerances)
    print(audit.groupby("family")["residual"].max())
