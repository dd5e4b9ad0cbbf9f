"""
Streaming inference and the stage benchmark
===========================================

Audio arrives in 1 s chunks. One thread classifies the scene, another runs
localization and detection, and the newest scene picks the thresholds.
"""
from seld_edge.accdoa import ThresholdMatrix
from seld_edge.nn import Model
from seld_edge.nn.stubs import stub_model
from seld_edge.pipeline import (PipelineConfig, PipelineModels, StreamingPipeline, benchmark,
                                format_stream_line, noise_chunks)

# scripted models keep the output easy to read
models = PipelineModels(Model(*stub_model("seld", "constant CarHorn 90 0.9")),
                        Model(*stub_model("asc", "scene Urban")), ThresholdMatrix.filled())
pipe = StreamingPipeline(models, PipelineConfig(scene_policy="sync"))
for res in pipe.run(noise_chunks(4, seed=1)):
    print(format_stream_line(res))
print(pipe.stats)

# the shipped networks with random weights, timed over 50 chunks
result = benchmark(PipelineConfig(), n=50)
print()
print(result.table())
