import { render } from "../figure.js";
import { figureArgs, runMain } from "./args.js";

runMain(() => {
  const args = figureArgs(process.argv.slice(2), {
    timeseries: { required: true },
    meanfield: {},
    pair: {},
    manifest: {},
  });
  const inputs: Record<string, string> = { timeseries: args.timeseries };
  if (args.meanfield) inputs.meanfield = args.meanfield;
  if (args.pair) inputs.pair = args.pair;
  if (args.manifest) inputs.manifest = args.manifest;
  render({ kind: "density", inputs, outPath: args.out });
  console.log(`density: wrote ${args.out}`);
});
