// Default is same-origin. `npm run build` rewrites dist/env.js with the
// API_BASE environment variable so a deployment can point elsewhere.
export const API_BASE: string = "";
