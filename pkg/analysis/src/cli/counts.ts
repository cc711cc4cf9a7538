import { render } from "../figure.js";
import { figureArgs, runMain } from "./args.js";

runMain(() => {
  const args = figureArgs(process.argv.slice(2), {
    counts: { required: true },
    window: {},
    t: {},
    "overlay-out": {},
  });
  const options: Record<string, string> = {};
  if (args.window) options.window = args.window;
  if (args.t) options.t = args.t;
  if (args["overlay-out"]) options.overlayOut = args["overlay-out"];
  render({ kind: "counts", inputs: { counts: args.counts }, outPath: args.out, options });
  console.log(`counts: wrote ${args.out}`);
});
