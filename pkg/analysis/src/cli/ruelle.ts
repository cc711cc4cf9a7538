import { render } from "../figure.js";
import { figureArgs, runMain } from "./args.js";

runMain(() => {
  const args = figureArgs(process.argv.slice(2), { timeseries: { required: true } });
  render({ kind: "ruelle", inputs: { timeseries: args.timeseries }, outPath: args.out });
  console.log(`ruelle: wrote ${args.out}`);
});
