import { render } from "../figure.js";
import { figureArgs, runMain } from "./args.js";

runMain(() => {
  const args = figureArgs(process.argv.slice(2), { residual: { required: true } });
  render({ kind: "residual", inputs: { residual: args.residual }, outPath: args.out });
  console.log(`residual: wrote ${args.out}`);
});
