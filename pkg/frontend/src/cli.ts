#!/usr/bin/env node
/**
 * pose-capture: feed the engine from a video file, a camera, or the
 * synthetic source.
 *
 *   pose-capture from-video --input clip.y4m --out stream.pose --model synthetic
 *   pose-capture from-video --input clip.y4m --target 127.0.0.1:7700 --realtime
 *   pose-capture capture --source synthetic --fps 30 --target 127.0.0.1:7700
 */
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import {
  AdapterConfig,
  CameraUnavailable,
  captureLoop,
  emitFromVideo,
  FileOutput,
  FrameOutput,
  openCamera,
  SocketOutput,
  syntheticLiveSource,
} from "./adapter.js";
import { ModelTier } from "./backends.js";
import { BadVideo } from "./y4m.js";

function parseTarget(target: string): { host: string; port: number } {
  const idx = target.lastIndexOf(":");
  if (idx < 0) return { host: "127.0.0.1", port: parseInt(target, 10) };
  return { host: target.slice(0, idx) || "127.0.0.1", port: parseInt(target.slice(idx + 1), 10) };
}

function makeOutput(args: { out?: string; target?: string }): FrameOutput {
  if ((args.out === undefined) === (args.target === undefined)) {
    throw new Error("provide exactly one of --out FILE or --target HOST:PORT");
  }
  if (args.out !== undefined) return new FileOutput(args.out);
  const { host, port } = parseTarget(args.target as string);
  return new SocketOutput(host, port, (msg) => console.error(`[sender] ${msg}`));
}

function adapterConfig(args: { model: string; minConfidence: number; twoD: boolean }): AdapterConfig {
  return {
    model: args.model as ModelTier,
    minConfidence: args.minConfidence,
    twoD: args.twoD,
  };
}

const modelChoices = ["lite", "full", "heavy", "synthetic"] as const;

await yargs(hideBin(process.argv))
  .scriptName("pose-capture")
  .command(
    "from-video",
    "emit a landmark stream from a recorded video (YUV4MPEG2)",
    (y) =>
      y
        .option("input", { type: "string", demandOption: true, describe: "video file (.y4m)" })
        .option("out", { type: "string", describe: "recorded-stream output file" })
        .option("target", { type: "string", describe: "engine socket HOST:PORT" })
        .option("model", { choices: modelChoices, default: "full" as const })
        .option("min-confidence", { type: "number", default: 0.5 })
        .option("two-d", { type: "boolean", default: false, describe: "emit 2d frames for the stereo path" })
        .option("realtime", { type: "boolean", default: false, describe: "pace emission at the video frame rate" }),
    async (args) => {
      const output = makeOutput(args);
      try {
        const stats = await emitFromVideo(
          args.input,
          adapterConfig({ model: args.model, minConfidence: args["min-confidence"], twoD: args["two-d"] }),
          output,
          args.realtime,
        );
        console.error(
          `read ${stats.framesRead} video frames, emitted ${stats.framesEmitted}, ` +
            `skipped ${stats.skippedNoDetection} without detection`,
        );
      } finally {
        await output.close();
      }
    },
  )
  .command(
    "capture",
    "stream live frames until interrupted",
    (y) =>
      y
        .option("source", { type: "string", default: "camera", describe: "camera | synthetic" })
        .option("camera", { type: "number", default: 0 })
        .option("fps", { type: "number", default: 30 })
        .option("duration", { type: "number", describe: "seconds (synthetic source only; default: run forever)" })
        .option("target", { type: "string", describe: "engine socket HOST:PORT" })
        .option("out", { type: "string", describe: "recorded-stream output file" })
        .option("model", { choices: modelChoices, default: "full" as const })
        .option("min-confidence", { type: "number", default: 0.5 })
        .option("two-d", { type: "boolean", default: false }),
    async (args) => {
      const source =
        args.source === "synthetic"
          ? syntheticLiveSource(args.fps, args.duration ?? null)
          : openCamera(args.camera);
      const output = makeOutput(args);
      const controller = new AbortController();
      process.on("SIGINT", () => controller.abort());
      try {
        const stats = await captureLoop(
          source,
          adapterConfig({ model: args.model, minConfidence: args["min-confidence"], twoD: args["two-d"] }),
          output,
          controller.signal,
        );
        console.error(`captured ${stats.framesRead} frames, emitted ${stats.framesEmitted}`);
      } finally {
        await output.close();
      }
    },
  )
  .demandCommand(1)
  .strict()
  .fail((msg, err) => {
    if (err instanceof CameraUnavailable) {
      console.error(`camera unavailable: ${err.message}`);
      process.exit(4);
    }
    if (err instanceof BadVideo) {
      console.error(`bad video: ${err.message}`);
      process.exit(3);
    }
    console.error(msg ?? String(err));
    process.exit(err ? 3 : 1);
  })
  .parseAsync();
