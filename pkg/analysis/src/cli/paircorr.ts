import { render } from "../figure.js";
import { figureArgs, runMain } from "./args.js";

runMain(() => {
  const args = figureArgs(process.argv.slice(2), {
    correlations: { required: true },
    timeseries: { required: true },
  });
  render({
    kind: "paircorr",
    inputs: { correlations: args.correlations, timeseries: args.timeseries },
    outPath: args.out,
  });
  console.log(`paircorr: wrote ${args.out}`);
});
